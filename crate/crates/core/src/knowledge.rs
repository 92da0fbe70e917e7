//! Two-state skill tracing over the prerequisite DAG.
//!
//! Each skill is latently learned or unlearned. Answers are noisy
//! observations (slip/guess); between answers every skill transitions
//! (learn, gated by a noisy-AND over its precursors, and forget). The
//! factored filter [`update_on_answer`] keeps one marginal per skill and
//! propagates evidence one step to direct precursors; [`exact_infer`]
//! enumerates the full joint and serves as the oracle for small nets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::skills::{SkillId, SkillNet};
use crate::{Error, Result};

/// Largest net exact enumeration accepts (2^n joint states).
pub const EXACT_MAX_SKILLS: usize = 12;

/// Per-skill emission/transition parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// P(incorrect | learned)
    pub slip: f64,
    /// P(correct | unlearned)
    pub guess: f64,
    /// P(unlearned -> learned) per step, before the precursor gate
    pub learn: f64,
    /// P(learned -> unlearned) per step
    pub forget: f64,
}

impl Default for Params {
    fn default() -> Params {
        Params {
            slip: 0.1,
            guess: 0.25,
            learn: 0.1,
            forget: 0.01,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.slip)
            || !in_unit(self.guess)
            || !in_unit(self.learn)
            || !in_unit(self.forget)
        {
            return Err(Error::Config("parameters must lie in [0,1]".into()));
        }
        if self.slip + self.guess >= 1.0 {
            return Err(Error::Config(format!(
                "slip + guess must stay below 1 (got {})",
                self.slip + self.guess
            )));
        }
        Ok(())
    }
}

/// Parameter store: per-skill overrides on top of a default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SkillParams {
    per_skill: BTreeMap<SkillId, Params>,
    default: Params,
}

impl SkillParams {
    pub fn uniform(default: Params) -> SkillParams {
        SkillParams {
            per_skill: BTreeMap::new(),
            default,
        }
    }

    pub fn get(&self, id: &str) -> &Params {
        self.per_skill.get(id).unwrap_or(&self.default)
    }

    pub fn set(&mut self, id: SkillId, params: Params) -> Result<()> {
        params.validate()?;
        self.per_skill.insert(id, params);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SkillId, &Params)> {
        self.per_skill.iter()
    }
}

/// Per-skill probability of being in the learned state.
///
/// Alongside the marginals the filter carries one covariance per DAG edge;
/// the covariances capture the parent-child coupling the gated learning
/// dynamics create and vanish on edgeless nets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillBeliefs {
    p: BTreeMap<SkillId, f64>,
    #[serde(
        default,
        skip_serializing_if = "BTreeMap::is_empty",
        with = "edge_cov_serde"
    )]
    edge_cov: BTreeMap<(SkillId, SkillId), f64>,
}

/// Tuple map keys do not fit JSON objects; store covariances as triples.
mod edge_cov_serde {
    use super::SkillId;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(SkillId, SkillId), f64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(&SkillId, &SkillId, f64)> =
            map.iter().map(|((a, b), &c)| (a, b, c)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(SkillId, SkillId), f64>, D::Error> {
        let v: Vec<(SkillId, SkillId, f64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b, c)| ((a, b), c)).collect())
    }
}

impl SkillBeliefs {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.p.get(id).copied()
    }

    pub fn set(&mut self, id: &str, p: f64) {
        debug_assert!((0.0..=1.0).contains(&p));
        if let Some(v) = self.p.get_mut(id) {
            *v = p;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SkillId, f64)> {
        self.p.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    fn cov(&self, from: &SkillId, to: &SkillId) -> f64 {
        self.edge_cov
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Maximum-entropy start: every skill at exactly 0.5.
pub fn init_beliefs(net: &SkillNet) -> SkillBeliefs {
    SkillBeliefs {
        p: net.skill_ids().map(|id| (id.clone(), 0.5)).collect(),
        edge_cov: net
            .edges()
            .map(|(a, b)| ((a.clone(), b.clone()), 0.0))
            .collect(),
    }
}

/// Probability the next answer on a skill is correct:
/// `p*(1-slip) + (1-p)*guess`, always inside `[guess, 1-slip]`.
pub fn predict_correct(p_learned: f64, params: &Params) -> f64 {
    p_learned * (1.0 - params.slip) + (1.0 - p_learned) * params.guess
}

/// One answer observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerObs {
    pub skill: SkillId,
    pub correct: bool,
}

fn obs_likelihoods(params: &Params, correct: bool) -> (f64, f64) {
    // (P(obs | learned), P(obs | unlearned))
    if correct {
        (1.0 - params.slip, params.guess)
    } else {
        (params.slip, 1.0 - params.guess)
    }
}

/// Valid 2x2 joint over (x_a, x_b) from marginals and covariance, as
/// [P(0,0), P(0,1), P(1,0), P(1,1)], Frechet-clamped.
fn pair_joint(pa: f64, pb: f64, cov: f64) -> [f64; 4] {
    let j11 = (pa * pb + cov).clamp((pa + pb - 1.0).max(0.0), pa.min(pb));
    [
        (1.0 - pa - pb + j11).max(0.0),
        (pb - j11).max(0.0),
        (pa - j11).max(0.0),
        j11.max(0.0),
    ]
}

/// Factored belief update after one answer.
///
/// 1. Bayes posterior on the answered skill; the observation also conditions
///    every pairwise joint incident to it, which moves the marginals of its
///    direct precursors (and successors) one step.
/// 2. Every skill transitions: `p <- p*(1-forget) + learn*E[(1-x)*gate]`,
///    where the gate expectation is the precursor product corrected by the
///    tracked edge covariances (plain `(1-p)*learn*prod p(q)` when they vanish).
/// 3. Each edge covariance propagates through the gated two-skill dynamics.
pub fn update_on_answer(
    beliefs: &SkillBeliefs,
    net: &SkillNet,
    params: &SkillParams,
    skill: &str,
    correct: bool,
) -> Result<SkillBeliefs> {
    if !net.contains(skill) {
        return Err(Error::UnknownSkill(skill.to_string()));
    }
    let sid = SkillId::new(skill);
    let mut next = beliefs.clone();
    let sp = params.get(skill);
    let (l1, l0) = obs_likelihoods(sp, correct);
    let p_s = beliefs.get(skill).expect("belief for every net skill");
    let denom = p_s * l1 + (1.0 - p_s) * l0;
    if denom > 0.0 {
        let p_s_post = (p_s * l1 / denom).clamp(0.0, 1.0);
        next.set(skill, p_s_post);
        let incident: Vec<(SkillId, SkillId)> = beliefs
            .edge_cov
            .keys()
            .filter(|(a, b)| *a == sid || *b == sid)
            .cloned()
            .collect();
        for (a, b) in incident {
            let partner = if a == sid { b.clone() } else { a.clone() };
            let p_u = beliefs.get(partner.as_str()).unwrap();
            // joint over (x_partner, x_s)
            let j = pair_joint(p_u, p_s, beliefs.cov(&a, &b));
            let j00 = j[0] * l0;
            let j01 = j[1] * l1;
            let j10 = j[2] * l0;
            let j11 = j[3] * l1;
            let z = j00 + j01 + j10 + j11;
            if z <= 0.0 {
                continue;
            }
            let pu_post = ((j10 + j11) / z).clamp(0.0, 1.0);
            let ps_pair = (j01 + j11) / z;
            next.set(partner.as_str(), pu_post);
            next.edge_cov.insert((a, b), j11 / z - pu_post * ps_pair);
        }
    }

    // simultaneous transition of all marginals, covariance-corrected gates
    let m = next.p.clone();
    let c = next.edge_cov.clone();
    for (id, &p_r) in &m {
        let rp = params.get(id.as_str());
        let pars = net.precursors(id.as_str())?;
        let gate: f64 = pars.iter().map(|q| m[*q]).product();
        let mut conj = (1.0 - p_r) * gate;
        for q in &pars {
            let other: f64 = pars.iter().filter(|r| **r != *q).map(|r| m[*r]).product();
            conj -= c.get(&((*q).clone(), id.clone())).copied().unwrap_or(0.0) * other;
        }
        let conj = conj.clamp(0.0, 1.0);
        let p_new = p_r * (1.0 - rp.forget) + rp.learn * conj;
        next.set(id.as_str(), p_new.clamp(0.0, 1.0));
    }

    // propagate each edge's covariance through one transition step
    for ((q, s), cov_old) in &c {
        let qp = params.get(q.as_str());
        let sp2 = params.get(s.as_str());
        let j = pair_joint(m[q], m[s], *cov_old);
        let gate_q: f64 = net.precursors(q.as_str())?.iter().map(|r| m[*r]).product();
        let g_other: f64 = net
            .precursors(s.as_str())?
            .iter()
            .filter(|r| ***r != *q)
            .map(|r| m[*r])
            .product();
        let t_parent = |x: bool| if x { 1.0 - qp.forget } else { qp.learn * gate_q };
        let t_child = |x_s: bool, x_q: bool| {
            if x_s {
                1.0 - sp2.forget
            } else if x_q {
                sp2.learn * g_other
            } else {
                0.0
            }
        };
        let mut j11_new = 0.0;
        let mut pq_new = 0.0;
        let mut ps_new = 0.0;
        for (idx, &mass) in j.iter().enumerate() {
            let xq = idx >= 2;
            let xs = idx % 2 == 1;
            let a = t_parent(xq);
            let b = t_child(xs, xq);
            j11_new += mass * a * b;
            pq_new += mass * a;
            ps_new += mass * b;
        }
        next.edge_cov
            .insert((q.clone(), s.clone()), j11_new - pq_new * ps_new);
    }
    Ok(next)
}

/// Exact filtered marginals by joint enumeration over all `2^n` latent
/// states. The oracle for nets with at most [`EXACT_MAX_SKILLS`] skills.
pub fn exact_infer(
    net: &SkillNet,
    params: &SkillParams,
    history: &[AnswerObs],
) -> Result<SkillBeliefs> {
    Ok(exact_infer_trace(net, params, history)?
        .pop()
        .unwrap_or_else(|| init_beliefs(net)))
}

/// As [`exact_infer`], but returns the marginals after every answer
/// (each entry is post-observation, post-transition).
pub fn exact_infer_trace(
    net: &SkillNet,
    params: &SkillParams,
    history: &[AnswerObs],
) -> Result<Vec<SkillBeliefs>> {
    let n = net.len();
    if n > EXACT_MAX_SKILLS {
        return Err(Error::NetTooLarge {
            n,
            max: EXACT_MAX_SKILLS,
        });
    }
    let ids: Vec<&SkillId> = net.skill_ids().collect();
    let index: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let parents: Vec<Vec<usize>> = ids
        .iter()
        .map(|id| {
            net.precursors(id.as_str())
                .unwrap()
                .into_iter()
                .map(|p| index[p.as_str()])
                .collect()
        })
        .collect();
    // children-before-parents order, so a skill's transition always reads
    // pre-transition parent bits
    let mut reverse_topo: Vec<usize> = (0..n).collect();
    reverse_topo.sort_by_key(|&i| std::cmp::Reverse(net.topo_index(ids[i].as_str()).unwrap()));

    let size = 1usize << n;
    let mut joint = vec![1.0 / size as f64; size];
    let mut trace = Vec::with_capacity(history.len());

    for obs in history {
        let s = *index
            .get(obs.skill.as_str())
            .ok_or_else(|| Error::UnknownSkill(obs.skill.to_string()))?;
        let sp = params.get(obs.skill.as_str());
        let (l1, l0) = obs_likelihoods(sp, obs.correct);

        // condition on the observation
        let bit = 1usize << s;
        let mut total = 0.0;
        for (state, p) in joint.iter_mut().enumerate() {
            *p *= if state & bit != 0 { l1 } else { l0 };
            total += *p;
        }
        if total > 0.0 {
            for p in joint.iter_mut() {
                *p /= total;
            }
        }

        // transition skill by skill; pairs differing in one bit exchange mass
        for &r in &reverse_topo {
            let rp = params.get(ids[r].as_str());
            let rbit = 1usize << r;
            for state in 0..size {
                if state & rbit != 0 {
                    continue; // visit each pair once, from the bit-clear side
                }
                let gate_open = parents[r].iter().all(|&q| state & (1usize << q) != 0);
                let learn_eff = if gate_open { rp.learn } else { 0.0 };
                let a0 = joint[state];
                let a1 = joint[state | rbit];
                joint[state] = a0 * (1.0 - learn_eff) + a1 * rp.forget;
                joint[state | rbit] = a0 * learn_eff + a1 * (1.0 - rp.forget);
            }
        }

        let mut beliefs = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            let ibit = 1usize << i;
            let marg: f64 = joint
                .iter()
                .enumerate()
                .filter(|(state, _)| state & ibit != 0)
                .map(|(_, &p)| p)
                .sum();
            beliefs.insert((*id).clone(), marg.clamp(0.0, 1.0));
        }
        trace.push(SkillBeliefs {
            p: beliefs,
            edge_cov: BTreeMap::new(),
        });
    }
    Ok(trace)
}

// ------------------------------------------------------------------ fitting

/// Answer sequence of one student, in time order.
pub type StudentAnswers = Vec<AnswerObs>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitSummary {
    pub fitted: Vec<SkillId>,
    /// Skills with no observations, left at the default parameters.
    pub defaulted: Vec<SkillId>,
    /// Skills whose observations were all-correct or all-incorrect; their
    /// estimates sit on the constraint boundary.
    pub degenerate: Vec<SkillId>,
    pub observations: BTreeMap<SkillId, usize>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: SkillParams,
    pub summary: FitSummary,
}

/// Constraint box applied after every M-step: the classic degeneracy guards
/// slip < 0.3 and guess < 0.5 (hence slip+guess < 1), forget <= learn.
fn project(p: &mut Params) {
    p.slip = p.slip.clamp(1e-4, 0.3 - 1e-9);
    p.guess = p.guess.clamp(1e-4, 0.5 - 1e-9);
    p.learn = p.learn.clamp(1e-4, 1.0 - 1e-9);
    p.forget = p.forget.clamp(0.0, p.learn);
}

/// EM (Baum-Welch) on the per-skill two-state chain, initial state fixed at
/// the model's 0.5 start. Skills without observations keep defaults.
pub fn fit_params(logs: &[StudentAnswers], net: &SkillNet) -> FitResult {
    let mut sequences: BTreeMap<SkillId, Vec<Vec<bool>>> = BTreeMap::new();
    for student in logs {
        let mut per_skill: BTreeMap<SkillId, Vec<bool>> = BTreeMap::new();
        for obs in student {
            if net.contains(obs.skill.as_str()) {
                per_skill.entry(obs.skill.clone()).or_default().push(obs.correct);
            }
        }
        for (id, seq) in per_skill {
            sequences.entry(id).or_default().push(seq);
        }
    }

    let mut params = SkillParams::default();
    let mut summary = FitSummary::default();
    for id in net.skill_ids() {
        match sequences.get(id) {
            None => summary.defaulted.push(id.clone()),
            Some(seqs) => {
                let n_obs: usize = seqs.iter().map(Vec::len).sum();
                summary.observations.insert(id.clone(), n_obs);
                let n_correct: usize =
                    seqs.iter().map(|s| s.iter().filter(|&&c| c).count()).sum();
                if n_correct == 0 || n_correct == n_obs {
                    summary.degenerate.push(id.clone());
                }
                let (fitted, ll) = baum_welch(seqs);
                summary.log_likelihood += ll;
                params.set(id.clone(), fitted).expect("projected params are valid");
                summary.fitted.push(id.clone());
            }
        }
    }
    FitResult { params, summary }
}

/// Baum-Welch over a set of observation sequences; states 0=unlearned,
/// 1=learned; start distribution fixed at (0.5, 0.5).
fn baum_welch(seqs: &[Vec<bool>]) -> (Params, f64) {
    let mut p = Params {
        slip: 0.15,
        guess: 0.3,
        learn: 0.2,
        forget: 0.05,
    };
    let mut last_ll = f64::NEG_INFINITY;
    let mut ll = 0.0;
    for _ in 0..200 {
        let mut occ = [0.0f64; 2];
        let mut correct_in = [0.0f64; 2];
        let mut trans_from = [0.0f64; 2];
        let mut trans_u_to_l = 0.0f64;
        let mut trans_l_to_u = 0.0f64;
        ll = 0.0;

        let a = [[1.0 - p.learn, p.learn], [p.forget, 1.0 - p.forget]];
        let emit = |state: usize, correct: bool| -> f64 {
            match (state, correct) {
                (1, true) => 1.0 - p.slip,
                (1, false) => p.slip,
                (_, true) => p.guess,
                (_, false) => 1.0 - p.guess,
            }
        };

        for seq in seqs {
            let t_len = seq.len();
            if t_len == 0 {
                continue;
            }
            let mut alpha = vec![[0.0f64; 2]; t_len];
            let mut scale = vec![0.0f64; t_len];
            for s in 0..2 {
                alpha[0][s] = 0.5 * emit(s, seq[0]);
            }
            scale[0] = alpha[0][0] + alpha[0][1];
            alpha[0][0] /= scale[0];
            alpha[0][1] /= scale[0];
            for t in 1..t_len {
                for j in 0..2 {
                    alpha[t][j] =
                        (alpha[t - 1][0] * a[0][j] + alpha[t - 1][1] * a[1][j]) * emit(j, seq[t]);
                }
                scale[t] = alpha[t][0] + alpha[t][1];
                alpha[t][0] /= scale[t];
                alpha[t][1] /= scale[t];
            }
            let mut beta = vec![[0.0f64; 2]; t_len];
            beta[t_len - 1] = [1.0, 1.0];
            for t in (0..t_len - 1).rev() {
                for i in 0..2 {
                    beta[t][i] = (a[i][0] * emit(0, seq[t + 1]) * beta[t + 1][0]
                        + a[i][1] * emit(1, seq[t + 1]) * beta[t + 1][1])
                        / scale[t + 1];
                }
            }
            for t in 0..t_len {
                let g = [alpha[t][0] * beta[t][0], alpha[t][1] * beta[t][1]];
                for s in 0..2 {
                    occ[s] += g[s];
                    if seq[t] {
                        correct_in[s] += g[s];
                    }
                }
                if t + 1 < t_len {
                    let mut xi = [[0.0f64; 2]; 2];
                    for (i, xi_row) in xi.iter_mut().enumerate() {
                        for (j, cell) in xi_row.iter_mut().enumerate() {
                            *cell = alpha[t][i] * a[i][j] * emit(j, seq[t + 1]) * beta[t + 1][j]
                                / scale[t + 1];
                        }
                    }
                    trans_from[0] += xi[0][0] + xi[0][1];
                    trans_from[1] += xi[1][0] + xi[1][1];
                    trans_u_to_l += xi[0][1];
                    trans_l_to_u += xi[1][0];
                }
            }
            ll += scale.iter().map(|c| c.ln()).sum::<f64>();
        }

        if occ[1] > 0.0 {
            p.slip = (occ[1] - correct_in[1]) / occ[1];
        }
        if occ[0] > 0.0 {
            p.guess = correct_in[0] / occ[0];
        }
        if trans_from[0] > 0.0 {
            p.learn = trans_u_to_l / trans_from[0];
        }
        if trans_from[1] > 0.0 {
            p.forget = trans_l_to_u / trans_from[1];
        }
        project(&mut p);

        if (ll - last_ll).abs() < 1e-7 * (1.0 + ll.abs()) {
            break;
        }
        last_ll = ll;
    }
    (p, ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::tests::{chain, skill};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap as Map;

    fn edgeless(ids: &[&str]) -> SkillNet {
        SkillNet::from_parts(ids.iter().map(|i| skill(i)).collect(), &[], Map::new()).unwrap()
    }

    #[test]
    fn beliefs_initialize_to_half() {
        let net = chain(&["a", "b", "c"]);
        let b = init_beliefs(&net);
        assert_eq!(b.len(), 3);
        for (_, p) in b.iter() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn empty_net_gives_empty_beliefs() {
        let net = edgeless(&[]);
        assert!(init_beliefs(&net).is_empty());
    }

    #[test]
    fn sample_net_beliefs() {
        let b = init_beliefs(&SkillNet::sample());
        assert_eq!(b.len(), 100);
        assert!(b.iter().all(|(_, p)| p == 0.5));
    }

    #[test]
    fn predict_boundaries_and_midpoint() {
        let p = |slip, guess| Params { slip, guess, learn: 0.0, forget: 0.0 };
        assert_abs_diff_eq!(predict_correct(1.0, &p(0.1, 0.0)), 0.9);
        assert_abs_diff_eq!(predict_correct(0.0, &p(0.0, 0.2)), 0.2);
        assert_abs_diff_eq!(predict_correct(0.5, &p(0.1, 0.2)), 0.55);
    }

    #[test]
    fn single_skill_bayes_by_hand() {
        let net = edgeless(&["a"]);
        let mut params = SkillParams::default();
        params
            .set(
                SkillId::new("a"),
                Params { slip: 0.1, guess: 0.2, learn: 0.1, forget: 0.0 },
            )
            .unwrap();
        let b = init_beliefs(&net);
        let b = update_on_answer(&b, &net, &params, "a", true).unwrap();
        // posterior 0.45/0.55 = 0.8182, then transition to 0.8364
        let posterior = 0.45 / 0.55;
        assert_abs_diff_eq!(
            b.get("a").unwrap(),
            posterior + (1.0 - posterior) * 0.1,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.get("a").unwrap(), 0.8364, epsilon = 5e-5);
    }

    #[test]
    fn noiseless_correct_answer_pins_belief() {
        let net = edgeless(&["a"]);
        let mut params = SkillParams::default();
        params
            .set(
                SkillId::new("a"),
                Params { slip: 0.0, guess: 0.0, learn: 0.0, forget: 0.0 },
            )
            .unwrap();
        let b = update_on_answer(&init_beliefs(&net), &net, &params, "a", true).unwrap();
        assert_abs_diff_eq!(b.get("a").unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_skill_is_an_error() {
        let net = edgeless(&["a"]);
        let b = init_beliefs(&net);
        assert!(update_on_answer(&b, &net, &SkillParams::default(), "zz", true).is_err());
    }

    #[test]
    fn factored_equals_exact_without_edges() {
        let net = edgeless(&["a", "b", "c"]);
        let params =
            SkillParams::uniform(Params { slip: 0.12, guess: 0.3, learn: 0.15, forget: 0.02 });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ids = ["a", "b", "c"];
        let history: Vec<AnswerObs> = (0..60)
            .map(|_| AnswerObs {
                skill: SkillId::new(ids[rng.gen_range(0..3)]),
                correct: rng.gen_bool(0.6),
            })
            .collect();
        let mut beliefs = init_beliefs(&net);
        for obs in &history {
            beliefs =
                update_on_answer(&beliefs, &net, &params, obs.skill.as_str(), obs.correct).unwrap();
        }
        let oracle = exact_infer(&net, &params, &history).unwrap();
        for (id, p) in beliefs.iter() {
            assert_abs_diff_eq!(p, oracle.get(id.as_str()).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_infer_rejects_large_nets() {
        let ids: Vec<String> = (0..13).map(|i| format!("s{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let net = edgeless(&refs);
        let err = exact_infer(&net, &SkillParams::default(), &[]).unwrap_err();
        assert!(matches!(err, Error::NetTooLarge { .. }));
    }

    #[test]
    fn two_independent_skills_factorize() {
        let net = edgeless(&["a", "b"]);
        let params =
            SkillParams::uniform(Params { slip: 0.1, guess: 0.2, learn: 0.1, forget: 0.01 });
        let history = vec![
            AnswerObs { skill: SkillId::new("a"), correct: true },
            AnswerObs { skill: SkillId::new("b"), correct: false },
            AnswerObs { skill: SkillId::new("a"), correct: true },
        ];
        let joint = exact_infer(&net, &params, &history).unwrap();
        // replay skill a's view by hand: obs, tick, tick (for b's answer), obs, tick
        let drift = |p: f64| p * (1.0 - 0.01) + (1.0 - p) * 0.1;
        let bayes = |p: f64| {
            let (l1, l0) = super::obs_likelihoods(params.get("a"), true);
            p * l1 / (p * l1 + (1.0 - p) * l0)
        };
        let expected = drift(bayes(drift(drift(bayes(0.5)))));
        assert_abs_diff_eq!(joint.get("a").unwrap(), expected, epsilon = 1e-12);
    }

    fn random_dag(n: usize, rng: &mut ChaCha8Rng) -> SkillNet {
        let ids: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
        let skills: Vec<_> = ids.iter().map(|i| skill(i)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.25) {
                    edges.push((SkillId::new(ids[i].clone()), SkillId::new(ids[j].clone())));
                }
            }
        }
        SkillNet::from_parts(skills, &edges, Map::new()).unwrap()
    }

    fn random_params(net: &SkillNet, rng: &mut ChaCha8Rng) -> SkillParams {
        let mut params = SkillParams::default();
        for id in net.skill_ids() {
            params
                .set(
                    id.clone(),
                    Params {
                        slip: 0.05 + rng.gen::<f64>() * 0.2,
                        guess: 0.05 + rng.gen::<f64>() * 0.3,
                        learn: 0.05 + rng.gen::<f64>() * 0.25,
                        forget: rng.gen::<f64>() * 0.05,
                    },
                )
                .unwrap();
        }
        params
    }

    /// Ancestral sampling from the generative model itself: latent states
    /// evolve with gated learning and forgetting, answers are emitted with
    /// slip/guess from the true state of a uniformly chosen skill.
    pub(crate) fn sample_history(
        net: &SkillNet,
        params: &SkillParams,
        len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<AnswerObs> {
        let ids: Vec<SkillId> = net.skill_ids().cloned().collect();
        let mut state: Map<SkillId, bool> =
            ids.iter().map(|id| (id.clone(), rng.gen_bool(0.5))).collect();
        let mut history = Vec::with_capacity(len);
        for _ in 0..len {
            let skill = ids[rng.gen_range(0..ids.len())].clone();
            let sp = params.get(skill.as_str());
            let p_correct = if state[&skill] { 1.0 - sp.slip } else { sp.guess };
            history.push(AnswerObs { skill, correct: rng.gen_bool(p_correct) });
            let snapshot = state.clone();
            for id in &ids {
                let kp = params.get(id.as_str());
                let gate = net
                    .precursors(id.as_str())
                    .unwrap()
                    .iter()
                    .all(|q| snapshot[q.as_str()]);
                let s = state.get_mut(id).unwrap();
                if *s {
                    if rng.gen_bool(kp.forget) {
                        *s = false;
                    }
                } else if gate && rng.gen_bool(kp.learn) {
                    *s = true;
                }
            }
        }
        history
    }

    #[test]
    fn factored_tracks_exact_on_random_dags() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst = 0.0f64;
        let mut gaps = Vec::new();
        for _ in 0..20 {
            let net = random_dag(8, &mut rng);
            let params = random_params(&net, &mut rng);
            let history = sample_history(&net, &params, 50, &mut rng);
            let mut beliefs = init_beliefs(&net);
            for obs in &history {
                beliefs =
                    update_on_answer(&beliefs, &net, &params, obs.skill.as_str(), obs.correct)
                        .unwrap();
            }
            let oracle = exact_infer(&net, &params, &history).unwrap();
            let mean_gap: f64 = beliefs
                .iter()
                .map(|(id, p)| (p - oracle.get(id.as_str()).unwrap()).abs())
                .sum::<f64>()
                / net.len() as f64;
            gaps.push(mean_gap);
            worst = worst.max(mean_gap);
        }
        let avg: f64 = gaps.iter().sum::<f64>() / gaps.len() as f64;
        eprintln!("mean-per-skill gaps: avg {avg:.4} worst {worst:.4}");
        assert!(worst <= 0.05, "worst mean per-skill gap {worst}");
    }

    #[test]
    fn unobserved_skill_decays_to_learn_forget_fixed_point() {
        let net = edgeless(&["a", "b"]);
        let params =
            SkillParams::uniform(Params { slip: 0.1, guess: 0.2, learn: 0.15, forget: 0.05 });
        let mut beliefs = init_beliefs(&net);
        for _ in 0..400 {
            beliefs = update_on_answer(&beliefs, &net, &params, "a", true).unwrap();
        }
        // b is never observed; its belief settles at learn/(learn+forget)
        assert_abs_diff_eq!(beliefs.get("b").unwrap(), 0.15 / 0.20, epsilon = 1e-9);
    }

    #[test]
    fn fit_recovers_planted_parameters() {
        let truth = Params { slip: 0.1, guess: 0.2, learn: 0.15, forget: 0.0 };
        let net = edgeless(&["a"]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut logs = Vec::new();
        for _ in 0..200 {
            let mut learned = rng.gen_bool(0.5);
            let mut seq = Vec::with_capacity(60);
            for _ in 0..60 {
                let p_correct = if learned { 1.0 - truth.slip } else { truth.guess };
                seq.push(AnswerObs {
                    skill: SkillId::new("a"),
                    correct: rng.gen_bool(p_correct),
                });
                if !learned && rng.gen_bool(truth.learn) {
                    learned = true;
                }
            }
            logs.push(seq);
        }
        let fit = fit_params(&logs, &net);
        let got = fit.params.get("a");
        assert!((got.slip - truth.slip).abs() < 0.05, "slip {}", got.slip);
        assert!((got.guess - truth.guess).abs() < 0.05, "guess {}", got.guess);
        assert!((got.learn - truth.learn).abs() < 0.05, "learn {}", got.learn);
        assert_eq!(fit.summary.fitted.len(), 1);
    }

    #[test]
    fn all_correct_data_is_degenerate() {
        let net = edgeless(&["a"]);
        let logs: Vec<StudentAnswers> = (0..20)
            .map(|_| {
                (0..30)
                    .map(|_| AnswerObs { skill: SkillId::new("a"), correct: true })
                    .collect()
            })
            .collect();
        let fit = fit_params(&logs, &net);
        assert_eq!(fit.summary.degenerate, vec![SkillId::new("a")]);
        assert!(fit.params.get("a").slip <= 1e-3);
    }

    #[test]
    fn empty_logs_keep_defaults() {
        let net = chain(&["a", "b"]);
        let fit = fit_params(&[], &net);
        assert!(fit.summary.fitted.is_empty());
        assert_eq!(fit.summary.defaulted.len(), 2);
        assert_eq!(fit.params.get("a"), &Params::default());
    }
}
