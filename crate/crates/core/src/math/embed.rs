//! Classical multidimensional scaling: double-center the squared
//! dissimilarities, eigendecompose, keep the top positive-eigenvalue
//! coordinates. Supports out-of-sample projection of new points given their
//! dissimilarities to the training set.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A fitted embedding basis. `coords` are the training points in the
/// embedded space; the remaining fields allow projecting new points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<Vec<f64>>,
    /// Row means of the squared dissimilarity matrix (the centering vector).
    row_means: Vec<f64>,
    grand_mean: f64,
    /// Top eigenvectors, one inner vec per kept dimension (length n).
    eigvecs: Vec<Vec<f64>>,
    /// Corresponding positive eigenvalues.
    eigvals: Vec<f64>,
    pub requested_dim: usize,
    /// True when fewer positive eigenvalues existed than requested.
    pub reduced: bool,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// Project a new point from its squared dissimilarities to the training
    /// points. Projecting a training point reproduces its coordinates.
    pub fn project(&self, sq_dissimilarities: &[f64]) -> Result<Vec<f64>> {
        let n = self.row_means.len();
        if sq_dissimilarities.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sq_dissimilarities.len(),
            });
        }
        let delta_mean = sq_dissimilarities.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = (0..n)
            .map(|i| -0.5 * (sq_dissimilarities[i] - self.row_means[i] - delta_mean + self.grand_mean))
            .collect();
        Ok(self
            .eigvals
            .iter()
            .zip(&self.eigvecs)
            .map(|(&l, v)| {
                let dot: f64 = v.iter().zip(&centered).map(|(a, b)| a * b).sum();
                dot / l.sqrt()
            })
            .collect())
    }
}

fn validate(d: &[Vec<f64>]) -> Result<usize> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config("dissimilarity matrix is not square".into()));
        }
        if d[i][i].abs() > 1e-9 {
            return Err(Error::Config("dissimilarity diagonal must be zero".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config("dissimilarities must be finite and nonnegative".into()));
            }
            if (v - d[j][i]).abs() > 1e-9 {
                return Err(Error::Config("dissimilarity matrix is not symmetric".into()));
            }
        }
    }
    Ok(n)
}

/// Embed a dissimilarity matrix into at most `dim` Euclidean dimensions.
/// If fewer positive eigenvalues exist, the dimension shrinks (`reduced`).
pub fn embed(dissimilarity: &[Vec<f64>], dim: usize) -> Result<Embedding> {
    let n = validate(dissimilarity)?;
    if n == 0 || dim == 0 {
        return Err(Error::NotEnoughData("embed needs points and dim >= 1".into()));
    }
    // squared dissimilarities, double-centered: K = -1/2 J D^2 J
    let d2: Vec<Vec<f64>> = dissimilarity
        .iter()
        .map(|row| row.iter().map(|v| v * v).collect())
        .collect();
    let row_means: Vec<f64> = d2.iter().map(|row| row.iter().sum::<f64>() / n as f64).collect();
    let grand_mean = row_means.iter().sum::<f64>() / n as f64;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = -0.5 * (d2[i][j] - row_means[i] - row_means[j] + grand_mean);
        }
    }
    let eig = k.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let max_ev = eig.eigenvalues[order[0]].max(0.0);
    let floor = 1e-9 * max_ev.max(1e-30);
    let mut eigvals = Vec::new();
    let mut eigvecs: Vec<Vec<f64>> = Vec::new();
    for &idx in order.iter().take(dim) {
        let l = eig.eigenvalues[idx];
        if l <= floor {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        // deterministic sign: largest-magnitude component positive
        let lead = v
            .iter()
            .cloned()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        eigvals.push(l);
        eigvecs.push(v);
    }
    if eigvals.is_empty() {
        // degenerate input (all-zero dissimilarities): a single flat axis
        return Ok(Embedding {
            coords: vec![vec![0.0]; n],
            row_means,
            grand_mean,
            eigvecs: vec![vec![0.0; n]],
            eigvals: vec![1.0],
            requested_dim: dim,
            reduced: true,
        });
    }
    let reduced = eigvals.len() < dim;
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            eigvals
                .iter()
                .zip(&eigvecs)
                .map(|(&l, v)| v[i] * l.sqrt())
                .collect()
        })
        .collect();
    Ok(Embedding {
        coords,
        row_means,
        grand_mean,
        eigvecs,
        eigvals,
        requested_dim: dim,
        reduced,
    })
}

/// Pairwise Euclidean distance matrix of row vectors.
pub fn euclidean_dissimilarity(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn collinear_points_embed_to_a_line() {
        // distances 1,1,2 on a line
        let d = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let e = embed(&d, 1).unwrap();
        assert_eq!(e.dim(), 1);
        let x: Vec<f64> = e.coords.iter().map(|c| c[0]).collect();
        assert_abs_diff_eq!((x[0] - x[1]).abs(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!((x[1] - x[2]).abs(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!((x[0] - x[2]).abs(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_matrix_embeds_to_origin() {
        let d = vec![vec![0.0; 4]; 4];
        let e = embed(&d, 3).unwrap();
        for c in &e.coords {
            for &v in c {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
        assert!(e.reduced);
    }

    #[test]
    fn euclidean_realizable_distances_are_reproduced() {
        let pts = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 2.0, 0.5],
            vec![-1.0, 1.0, 0.0],
            vec![2.0, -1.0, 3.0],
            vec![0.5, 0.5, 0.5],
        ];
        let d = euclidean_dissimilarity(&pts);
        let e = embed(&d, 3).unwrap();
        let d2 = euclidean_dissimilarity(&e.coords);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_abs_diff_eq!(d[i][j], d2[i][j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn projecting_training_point_reproduces_coords() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 4.0],
            vec![3.0, 4.0],
        ];
        let d = euclidean_dissimilarity(&pts);
        let e = embed(&d, 2).unwrap();
        for (i, want) in e.coords.iter().enumerate() {
            let sq: Vec<f64> = d[i].iter().map(|v| v * v).collect();
            let got = e.project(&sq).unwrap();
            for (a, b) in got.iter().zip(want) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let d = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(embed(&d, 1).is_err());
    }
}
