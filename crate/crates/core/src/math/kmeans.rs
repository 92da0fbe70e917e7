//! Seeded K-Means (k-means++ init, Lloyd iterations, restart protocol) and
//! BIC-based selection of the cluster count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// True if an empty cluster had to be re-seeded during Lloyd iterations.
    pub reseeded: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with existing centroids
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    let mut reseeded = false;
    for _ in 0..200 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed on the point farthest from its assigned centroid
                let far = (0..n)
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centroids[labels[i]])
                            .partial_cmp(&sq_dist(&points[j], &centroids[labels[j]]))
                            .unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                reseeded = true;
                changed = true;
            } else {
                for (s, cv) in sums[c].iter().zip(centroids[c].iter_mut()) {
                    *cv = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    KMeansResult {
        centroids,
        labels,
        inertia,
        reseeded,
    }
}

/// K-Means with `restarts` seeded k-means++ starts; the run with the lowest
/// inertia wins (ties break toward the earlier restart).
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if points.is_empty() || k == 0 {
        return Err(Error::NotEnoughData("kmeans needs points and k >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::NotEnoughData(format!(
            "k={} exceeds {} points",
            k,
            points.len()
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let init = plus_plus_init(points, k, &mut rng);
        let run = lloyd(points, init);
        if best.as_ref().map(|b| run.inertia < b.inertia).unwrap_or(true) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// BIC of a hard-assignment spherical Gaussian mixture: -2*logL + params*ln n.
pub fn bic(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let k = centroids.len();
    let rss: f64 = points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    let dof = (d * n).saturating_sub(d * k).max(1);
    let sigma2 = (rss / dof as f64).max(1e-12);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut loglik = 0.0;
    for &c in &counts {
        if c > 0 {
            loglik += c as f64 * (c as f64 / n as f64).ln();
        }
    }
    loglik += -(n as f64 * d as f64 / 2.0) * (2.0 * std::f64::consts::PI * sigma2).ln()
        - rss / (2.0 * sigma2);
    let params = (k - 1) + k * d + 1;
    -2.0 * loglik + params as f64 * (n as f64).ln()
}

/// Choose the cluster count in `k_range` minimizing BIC.
pub fn select_k(
    points: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    restarts: usize,
    seed: u64,
) -> Result<usize> {
    let n = points.len();
    if n < *k_range.start() + 1 {
        return Err(Error::NotEnoughData(format!(
            "{} points cannot support k >= {}",
            n,
            k_range.start()
        )));
    }
    let mut best: Option<(f64, usize)> = None;
    for k in k_range {
        if k >= n {
            break;
        }
        let run = kmeans(points, k, restarts, seed)?;
        let score = bic(points, &run.labels, &run.centroids);
        if best.map(|(b, _)| score < b).unwrap_or(true) {
            best = Some((score, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::NotEnoughData("empty k range".into()))
}
