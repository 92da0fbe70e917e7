//! Temporally coherent clustering of session behavior.
//!
//! Each student-session becomes a small Markov chain over navigation or
//! input states. Pairwise chain similarities form one matrix per session
//! index; the series is smoothed adaptively (leaning on history when the
//! estimated noise is high, on the current matrix when novelty is high) and
//! each smoothed matrix is clustered with K-Means after an MDS embedding.
//! Labels are matched across consecutive sessions so ribbons stay stable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::events::{EventKind, Session};
use crate::math::embed::embed;
use crate::math::kmeans::kmeans;
use crate::math::stats::{median, min_cost_assignment};
use crate::{Error, Result};

/// Maps event kinds onto chain states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMapping {
    pub name: String,
    pub states: Vec<String>,
    kinds: BTreeMap<EventKind, usize>,
}

impl StateMapping {
    /// Navigation behavior: Game, Shop, Performance.
    pub fn navigation() -> StateMapping {
        let mut kinds = BTreeMap::new();
        kinds.insert(EventKind::NavGame, 0);
        kinds.insert(EventKind::NavShop, 1);
        kinds.insert(EventKind::NavPerformance, 2);
        StateMapping {
            name: "navigation".into(),
            states: vec!["Game".into(), "Shop".into(), "Performance".into()],
            kinds,
        }
    }

    /// Input behavior: Input, InvalidInput, Backspace, Enter.
    pub fn input() -> StateMapping {
        let mut kinds = BTreeMap::new();
        kinds.insert(EventKind::KeyInput, 0);
        kinds.insert(EventKind::InvalidInput, 1);
        kinds.insert(EventKind::Backspace, 2);
        kinds.insert(EventKind::Enter, 3);
        StateMapping {
            name: "input".into(),
            states: vec![
                "Input".into(),
                "InvalidInput".into(),
                "Backspace".into(),
                "Enter".into(),
            ],
            kinds,
        }
    }

    pub fn state_of(&self, kind: &EventKind) -> Option<usize> {
        self.kinds.get(kind).copied()
    }
}

/// Aggregated representation of one session: a row-stochastic transition
/// matrix plus the empirical state occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorChain {
    pub states: Vec<String>,
    pub transitions: Vec<Vec<f64>>,
    pub occupancy: Vec<f64>,
}

/// Estimate a chain from one session with additive smoothing of 0.5 per
/// transition cell. An empty (or unmapped) session yields uniform rows and
/// uniform occupancy.
pub fn estimate_chain(session: &Session, mapping: &StateMapping) -> BehaviorChain {
    let n = mapping.states.len();
    let sequence: Vec<usize> = session
        .events
        .iter()
        .filter_map(|e| mapping.state_of(&e.kind))
        .collect();
    let mut counts = vec![vec![0.0f64; n]; n];
    for w in sequence.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let transitions: Vec<Vec<f64>> = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + 0.5 * n as f64;
            row.into_iter().map(|c| (c + 0.5) / total).collect()
        })
        .collect();
    let occupancy = if sequence.is_empty() {
        vec![1.0 / n as f64; n]
    } else {
        let mut occ = vec![0.0f64; n];
        for &s in &sequence {
            occ[s] += 1.0;
        }
        occ.iter().map(|c| c / sequence.len() as f64).collect()
    };
    BehaviorChain {
        states: mapping.states.clone(),
        transitions,
        occupancy,
    }
}

/// Occupancy-weighted squared distance between two chains over the same
/// state set: `d^2 = sum_i pi_bar_i * sum_j (A_ij - B_ij)^2`.
pub fn chain_distance_sq(a: &BehaviorChain, b: &BehaviorChain) -> Result<f64> {
    if a.states != b.states {
        return Err(Error::StateSetMismatch(
            a.states.join(","),
            b.states.join(","),
        ));
    }
    let mut d2 = 0.0;
    for i in 0..a.states.len() {
        let weight = 0.5 * (a.occupancy[i] + b.occupancy[i]);
        let row_gap: f64 = a.transitions[i]
            .iter()
            .zip(&b.transitions[i])
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        d2 += weight * row_gap;
    }
    Ok(d2)
}

/// Gaussian-kernel similarity `exp(-d^2 / sigma^2)`, in (0, 1].
pub fn chain_similarity(a: &BehaviorChain, b: &BehaviorChain, sigma: f64) -> Result<f64> {
    Ok((-chain_distance_sq(a, b)? / (sigma * sigma)).exp())
}

/// Median heuristic: the median nonzero pairwise chain distance across the
/// whole series (1.0 when every chain coincides).
pub fn median_sigma(chains_per_session: &[Vec<BehaviorChain>]) -> f64 {
    let mut dists = Vec::new();
    for chains in chains_per_session {
        for i in 0..chains.len() {
            for j in (i + 1)..chains.len() {
                if let Ok(d2) = chain_distance_sq(&chains[i], &chains[j]) {
                    if d2 > 0.0 {
                        dists.push(d2.sqrt());
                    }
                }
            }
        }
    }
    if dists.is_empty() {
        1.0
    } else {
        median(&dists).max(1e-9)
    }
}

/// One similarity matrix per session index: symmetric, unit diagonal.
pub fn similarity_series(
    chains_per_session: &[Vec<BehaviorChain>],
    sigma: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut series = Vec::with_capacity(chains_per_session.len());
    for chains in chains_per_session {
        let n = chains.len();
        let mut w = vec![vec![1.0f64; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let s = chain_similarity(&chains[i], &chains[j], sigma)?;
                w[i][j] = s;
                w[j][i] = s;
            }
        }
        series.push(w);
    }
    Ok(series)
}

fn frobenius_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt()
}

/// Adaptive temporal smoothing.
///
/// `S_1 = W_1`; afterwards `gamma_t = nu_t / (nu_t + eta_t)` with `nu_t` the
/// running median of consecutive-matrix gaps (noise) and `eta_t` the gap
/// between `W_t` and `S_{t-1}` (novelty), and
/// `S_t = (1-gamma_t)*W_t + gamma_t*S_{t-1}`. High noise pulls the estimate
/// toward history; a large novelty burst snaps it back to the data.
pub fn adaptive_smooth(series: &[Vec<Vec<f64>>]) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
    let mut smoothed: Vec<Vec<Vec<f64>>> = Vec::with_capacity(series.len());
    let mut gammas = Vec::with_capacity(series.len());
    let mut diffs = Vec::new();
    for (t, w) in series.iter().enumerate() {
        if t == 0 {
            smoothed.push(w.clone());
            gammas.push(0.0);
            continue;
        }
        diffs.push(frobenius_gap(w, &series[t - 1]));
        let noise = median(&diffs);
        let novelty = frobenius_gap(w, &smoothed[t - 1]);
        let gamma = if noise + novelty > 0.0 {
            noise / (noise + novelty)
        } else {
            0.0
        };
        let prev = smoothed[t - 1].clone();
        let blended: Vec<Vec<f64>> = w
            .iter()
            .zip(&prev)
            .map(|(rw, rs)| {
                rw.iter()
                    .zip(rs)
                    .map(|(x, s)| (1.0 - gamma) * x + gamma * s)
                    .collect()
            })
            .collect();
        smoothed.push(blended);
        gammas.push(gamma);
    }
    (smoothed, gammas)
}

/// K-Means labels for one smoothed similarity matrix, clustered in a
/// 3-dimensional MDS embedding of `1 - S`.
#[derive(Debug, Clone)]
pub struct SessionClustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// An empty cluster had to be re-seeded (degenerate input).
    pub reseeded: bool,
}

pub fn cluster_sessions(similarity: &[Vec<f64>], k: usize, seed: u64) -> Result<SessionClustering> {
    let n = similarity.len();
    if k > n {
        return Err(Error::NotEnoughData(format!("k={k} exceeds {n} students")));
    }
    let dissimilarity: Vec<Vec<f64>> = similarity
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &s)| if i == j { 0.0 } else { (1.0 - s).max(0.0) })
                .collect()
        })
        .collect();
    let embedding = embed(&dissimilarity, 3)?;
    let run = kmeans(&embedding.coords, k, 20, seed)?;
    Ok(SessionClustering {
        labels: run.labels,
        centroids: run.centroids,
        reseeded: run.reseeded,
    })
}

/// Rename labels for temporal continuity: minimum-cost bipartite matching
/// between consecutive centroid sets (embedding conventions are shared, so
/// centroid distances are comparable); unmatched clusters get fresh ids.
pub fn align_labels(
    labels_per_t: &[Vec<usize>],
    centroids_per_t: &[Vec<Vec<f64>>],
) -> Vec<Vec<usize>> {
    assert_eq!(labels_per_t.len(), centroids_per_t.len());
    let mut aligned = Vec::with_capacity(labels_per_t.len());
    let mut prev_centroids: Vec<Vec<f64>> = Vec::new(); // indexed by aligned id
    let mut next_fresh = 0usize;
    for (labels, centroids) in labels_per_t.iter().zip(centroids_per_t) {
        let k = centroids.len();
        let mut rename: Vec<usize> = vec![usize::MAX; k];
        if prev_centroids.is_empty() {
            for (i, slot) in rename.iter_mut().enumerate() {
                *slot = i;
            }
            next_fresh = k;
        } else {
            let dist = |a: &[f64], b: &[f64]| -> f64 {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            };
            if k <= prev_centroids.len() {
                // every current cluster inherits a previous id
                let cost: Vec<Vec<f64>> = centroids
                    .iter()
                    .map(|c| prev_centroids.iter().map(|p| dist(c, p)).collect())
                    .collect();
                let assignment = min_cost_assignment(&cost);
                for (i, &col) in assignment.iter().enumerate() {
                    rename[i] = col;
                }
            } else {
                // more clusters than before: previous ids claim their nearest,
                // the rest get fresh ids
                let cost: Vec<Vec<f64>> = prev_centroids
                    .iter()
                    .map(|p| centroids.iter().map(|c| dist(p, c)).collect())
                    .collect();
                let assignment = min_cost_assignment(&cost);
                for (prev_id, &cur) in assignment.iter().enumerate() {
                    rename[cur] = prev_id;
                }
                for slot in rename.iter_mut() {
                    if *slot == usize::MAX {
                        *slot = next_fresh;
                        next_fresh += 1;
                    }
                }
            }
        }
        next_fresh = next_fresh.max(rename.iter().copied().max().unwrap_or(0) + 1);
        // store centroids under their aligned ids for the next step
        let mut stored: Vec<Vec<f64>> = vec![Vec::new(); next_fresh];
        for (i, c) in centroids.iter().enumerate() {
            stored[rename[i]] = c.clone();
        }
        // carry forward previous centroids for ids absent this step
        for (id, c) in prev_centroids.iter().enumerate() {
            if id < stored.len() && stored[id].is_empty() && !c.is_empty() {
                stored[id] = c.clone();
            }
        }
        prev_centroids = stored;
        aligned.push(labels.iter().map(|&l| rename[l]).collect());
    }
    aligned
}

/// Ribbon-ready result of the full pipeline.
#[derive(Debug, Clone)]
pub struct TemporalClusters {
    /// Aligned cluster label per session index and student.
    pub labels: Vec<Vec<usize>>,
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub reseeded: bool,
}

/// Chains -> similarities -> adaptive smoothing -> per-session K-Means ->
/// label alignment.
pub fn temporal_pipeline(
    chains_per_session: &[Vec<BehaviorChain>],
    k: usize,
    seed: u64,
) -> Result<TemporalClusters> {
    if chains_per_session.is_empty() {
        return Err(Error::NotEnoughData("no sessions".into()));
    }
    let sigma = median_sigma(chains_per_session);
    let series = similarity_series(chains_per_session, sigma)?;
    let (smoothed, gammas) = adaptive_smooth(&series);
    let mut labels = Vec::new();
    let mut centroids = Vec::new();
    let mut reseeded = false;
    for s in &smoothed {
        let run = cluster_sessions(s, k, seed)?;
        reseeded |= run.reseeded;
        labels.push(run.labels);
        centroids.push(run.centroids);
    }
    Ok(TemporalClusters {
        labels: align_labels(&labels, &centroids),
        gammas,
        sigma,
        reseeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nav_session(kinds: &[EventKind]) -> Session {
        Session {
            student_id: "s".into(),
            session_id: "x".into(),
            events: kinds
                .iter()
                .enumerate()
                .map(|(i, k)| Event::new("s", "x", i as i64 * 1000, k.clone()))
                .collect(),
        }
    }

    #[test]
    fn empty_session_gives_uniform_chain() {
        let chain = estimate_chain(&nav_session(&[]), &StateMapping::navigation());
        for row in &chain.transitions {
            for &p in row {
                assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
            }
        }
        for &o in &chain.occupancy {
            assert_abs_diff_eq!(o, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_counted_smoothed_transition() {
        // G,S,G,S: two G->S transitions, one S->G
        let chain = estimate_chain(
            &nav_session(&[
                EventKind::NavGame,
                EventKind::NavShop,
                EventKind::NavGame,
                EventKind::NavShop,
            ]),
            &StateMapping::navigation(),
        );
        assert_abs_diff_eq!(chain.transitions[0][1], 2.5 / 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(chain.transitions[1][0], 1.5 / 2.5, epsilon = 1e-12);
        let occ = &chain.occupancy;
        assert_abs_diff_eq!(occ[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(occ[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_cycle_saturates_transitions() {
        let mut kinds = Vec::new();
        for _ in 0..100 {
            kinds.push(EventKind::NavGame);
            kinds.push(EventKind::NavShop);
            kinds.push(EventKind::NavPerformance);
        }
        let chain = estimate_chain(&nav_session(&kinds), &StateMapping::navigation());
        assert!(chain.transitions[0][1] > 0.98);
        assert!(chain.transitions[1][2] > 0.98);
        assert!(chain.transitions[2][0] > 0.97);
    }

    #[test]
    fn rows_are_stochastic() {
        let chain = estimate_chain(
            &nav_session(&[EventKind::NavGame, EventKind::NavShop]),
            &StateMapping::navigation(),
        );
        for row in &chain.transitions {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(chain.occupancy.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    fn two_state(transitions: [[f64; 2]; 2]) -> BehaviorChain {
        BehaviorChain {
            states: vec!["A".into(), "B".into()],
            transitions: transitions.iter().map(|r| r.to_vec()).collect(),
            occupancy: vec![0.5, 0.5],
        }
    }

    #[test]
    fn self_similarity_is_one() {
        let a = two_state([[0.7, 0.3], [0.2, 0.8]]);
        assert_abs_diff_eq!(chain_similarity(&a, &a, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn similarity_is_symmetric() {
        let a = two_state([[0.7, 0.3], [0.2, 0.8]]);
        let b = two_state([[0.4, 0.6], [0.5, 0.5]]);
        assert_abs_diff_eq!(
            chain_similarity(&a, &b, 0.7).unwrap(),
            chain_similarity(&b, &a, 0.7).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn maximally_different_two_state_chains() {
        let a = two_state([[1.0, 0.0], [0.0, 1.0]]);
        let b = two_state([[0.0, 1.0], [1.0, 0.0]]);
        let sigma = 1.3;
        assert_abs_diff_eq!(
            chain_similarity(&a, &b, sigma).unwrap(),
            (-2.0f64 / (sigma * sigma)).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn state_set_mismatch_errors() {
        let a = two_state([[1.0, 0.0], [0.0, 1.0]]);
        let mut b = a.clone();
        b.states = vec!["X".into(), "Y".into()];
        assert!(chain_similarity(&a, &b, 1.0).is_err());
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let w = vec![vec![1.0, 0.4], vec![0.4, 1.0]];
        let series = vec![w.clone(), w.clone(), w.clone()];
        let (smoothed, _) = adaptive_smooth(&series);
        for s in &smoothed {
            assert_eq!(s, &w);
        }
    }

    #[test]
    fn noise_is_damped() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let mut series = Vec::new();
        for _ in 0..40 {
            let mut w = vec![vec![0.0; n]; n];
            for i in 0..n {
                w[i][i] = 1.0;
                for j in (i + 1)..n {
                    let v = (0.5 + (rng.gen::<f64>() - 0.5) * 0.4).clamp(0.0, 1.0);
                    w[i][j] = v;
                    w[j][i] = v;
                }
            }
            series.push(w);
        }
        let (smoothed, gammas) = adaptive_smooth(&series);
        let late_gamma = crate::math::stats::mean(&gammas[10..]);
        assert!(late_gamma > 0.5, "late gamma {late_gamma}");
        // variance of one off-diagonal cell shrinks under smoothing
        let raw: Vec<f64> = series[10..].iter().map(|w| w[0][1]).collect();
        let smooth: Vec<f64> = smoothed[10..].iter().map(|w| w[0][1]).collect();
        assert!(
            crate::math::stats::variance(&smooth) < 0.5 * crate::math::stats::variance(&raw),
            "smoothed variance not reduced"
        );
    }

    #[test]
    fn regime_change_outruns_fixed_gamma() {
        let flat = |v: f64| vec![vec![1.0, v], vec![v, 1.0]];
        let mut series = Vec::new();
        for _ in 0..10 {
            series.push(flat(0.9));
        }
        for _ in 0..6 {
            series.push(flat(0.1));
        }
        let (adaptive, gammas) = adaptive_smooth(&series);
        // fixed-coefficient baseline with gamma = 0.9
        let mut fixed = vec![series[0].clone()];
        for w in &series[1..] {
            let prev = fixed.last().unwrap().clone();
            fixed.push(
                w.iter()
                    .zip(&prev)
                    .map(|(rw, rp)| {
                        rw.iter().zip(rp).map(|(x, p)| 0.1 * x + 0.9 * p).collect()
                    })
                    .collect(),
            );
        }
        let target = 0.1;
        let adaptive_err = (adaptive[12][0][1] - target).abs();
        let fixed_err = (fixed[12][0][1] - target).abs();
        assert!(
            adaptive_err < fixed_err,
            "adaptive {adaptive_err} vs fixed {fixed_err}"
        );
        // the jump at t=10 makes novelty spike, so gamma dips there
        assert!(gammas[10] < 0.5, "gamma at jump {}", gammas[10]);
    }

    #[test]
    fn smoothing_is_elementwise_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let series: Vec<Vec<Vec<f64>>> = (0..10)
            .map(|_| {
                (0..4)
                    .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
                    .collect()
            })
            .collect();
        let (smoothed, _) = adaptive_smooth(&series);
        for t in 1..series.len() {
            for i in 0..4 {
                for j in 0..4 {
                    let lo = series[t][i][j].min(smoothed[t - 1][i][j]) - 1e-12;
                    let hi = series[t][i][j].max(smoothed[t - 1][i][j]) + 1e-12;
                    assert!(smoothed[t][i][j] >= lo && smoothed[t][i][j] <= hi);
                }
            }
        }
    }

    #[test]
    fn two_cliques_split() {
        let n = 8;
        let mut s = vec![vec![0.05; n]; n];
        for i in 0..n {
            s[i][i] = 1.0;
            for j in 0..n {
                if i != j && (i < 4) == (j < 4) {
                    s[i][j] = 0.95;
                }
            }
        }
        let run = cluster_sessions(&s, 2, 7).unwrap();
        let truth: Vec<usize> = (0..n).map(|i| usize::from(i >= 4)).collect();
        assert_abs_diff_eq!(
            crate::math::stats::adjusted_rand_index(&run.labels, &truth),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identical_rows_collapse_with_reseed_report() {
        let n = 6;
        let s = vec![vec![1.0; n]; n];
        let run = cluster_sessions(&s, 3, 7).unwrap();
        assert!(run.reseeded);
        assert_eq!(run.labels.len(), n);
    }

    #[test]
    fn k_exceeding_students_errors() {
        let s = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        assert!(cluster_sessions(&s, 3, 0).is_err());
    }

    #[test]
    fn permuted_identical_clustering_aligns_to_identity() {
        let labels_a = vec![0usize, 0, 1, 1, 2, 2];
        let labels_b = vec![2usize, 2, 0, 0, 1, 1]; // same partition, renamed
        let centroids_a = vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]];
        let centroids_b = vec![vec![5.0, 0.0], vec![0.0, 5.0], vec![0.0, 0.0]];
        let aligned = align_labels(
            &[labels_a.clone(), labels_b],
            &[centroids_a, centroids_b],
        );
        assert_eq!(aligned[0], aligned[1]);
        assert_eq!(aligned[0], labels_a);
    }

    #[test]
    fn drifting_cluster_keeps_its_label() {
        let labels = vec![0usize, 1];
        let t0 = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let t1 = vec![vec![0.4, 0.1], vec![10.2, -0.2]]; // slight drift
        let aligned = align_labels(&[labels.clone(), labels.clone()], &[t0, t1]);
        assert_eq!(aligned[0], aligned[1]);
    }

    #[test]
    fn extra_cluster_gets_fresh_id() {
        let t0_labels = vec![0usize, 1];
        let t1_labels = vec![0usize, 1, 2];
        let t0 = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let t1 = vec![vec![0.1, 0.0], vec![9.9, 0.0], vec![50.0, 50.0]];
        let aligned = align_labels(&[t0_labels, t1_labels], &[t0, t1]);
        assert_eq!(aligned[1][0], 0);
        assert_eq!(aligned[1][1], 1);
        assert_eq!(aligned[1][2], 2); // fresh id beyond the previous set
    }

    #[test]
    fn pipeline_recovers_planted_archetypes() {
        // three navigation archetypes: game-focused, shop-heavy, wanderer
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let archetype_events = |arch: usize, rng: &mut ChaCha8Rng| -> Vec<EventKind> {
            let mut kinds = Vec::new();
            let mut state = 0usize;
            for _ in 0..60 {
                let p_move: f64 = rng.gen();
                state = match arch {
                    0 => {
                        if p_move < 0.9 {
                            0
                        } else {
                            1
                        }
                    }
                    1 => {
                        if state == 1 && p_move < 0.6 {
                            1
                        } else if p_move < 0.5 {
                            1
                        } else {
                            0
                        }
                    }
                    _ => rng.gen_range(0..3),
                };
                kinds.push(match state {
                    0 => EventKind::NavGame,
                    1 => EventKind::NavShop,
                    _ => EventKind::NavPerformance,
                });
            }
            kinds
        };
        let n_students = 18;
        let truth: Vec<usize> = (0..n_students).map(|i| i % 3).collect();
        let chains_per_t: Vec<Vec<BehaviorChain>> = (0..6)
            .map(|_| {
                truth
                    .iter()
                    .map(|&arch| {
                        estimate_chain(
                            &nav_session(&archetype_events(arch, &mut rng)),
                            &StateMapping::navigation(),
                        )
                    })
                    .collect()
            })
            .collect();
        let result = temporal_pipeline(&chains_per_t, 3, 99).unwrap();
        let last = result.labels.last().unwrap();
        let ari = crate::math::stats::adjusted_rand_index(last, &truth);
        assert!(ari >= 0.8, "ari {ari}");
    }
}
