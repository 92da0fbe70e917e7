//! Scalar statistics and small metric helpers.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n-1 denominator); 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Percentile by nearest-rank interpolation, q in [0,1].
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

/// Least-squares slope of `ys` against x = 0,1,2,...
pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn log_gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
}

/// Two-sided Welch t-test p-value for a difference in means.
/// Returns 1.0 when either side is degenerate (fewer than 2 values or zero
/// pooled variance).
pub fn welch_t_pvalue(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 || b.len() < 2 {
        return 1.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a), variance(b));
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return if (ma - mb).abs() > 0.0 { 0.0 } else { 1.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df.max(1.0)).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Area under the ROC curve via the rank statistic, with tie correction.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    (rank_sum - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map(|&m| m + 1).unwrap_or(0);
    let kb = b.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

/// Minimum-cost injective assignment of rows to columns (rows <= columns),
/// by bitmask dynamic programming. Returns, per row, the chosen column.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(rows <= cols, "need rows <= cols");
    assert!(cols <= 20, "assignment limited to small label counts");
    let full = 1usize << cols;
    let mut dp = vec![f64::INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    dp[0] = 0.0;
    for mask in 0..full {
        let row = (mask as u32).count_ones() as usize;
        if row >= rows || !dp[mask].is_finite() {
            continue;
        }
        for col in 0..cols {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let c = dp[mask] + cost[row][col];
            if c < dp[next] {
                dp[next] = c;
                choice[next] = col;
            }
        }
    }
    // best final mask with `rows` bits set
    let (best_mask, _) = (0..full)
        .filter(|m| (*m as u32).count_ones() as usize == rows && dp[*m].is_finite())
        .map(|m| (m, dp[m]))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("feasible assignment exists");
    let mut assignment = vec![usize::MAX; rows];
    let mut mask = best_mask;
    while mask != 0 {
        let col = choice[mask];
        let row = (mask as u32).count_ones() as usize - 1;
        assignment[row] = col;
        mask &= !(1 << col);
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slope_of_line_is_recovered() {
        let ys: Vec<f64> = (0..10).map(|i| 3.0 + 0.25 * i as f64).collect();
        assert_abs_diff_eq!(least_squares_slope(&ys), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn auc_perfect_and_chance() {
        let labels = vec![false, false, true, true];
        assert_abs_diff_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &labels), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ari_identity_and_independence() {
        let a = vec![0, 0, 1, 1, 2, 2];
        assert_abs_diff_eq!(adjusted_rand_index(&a, &a), 1.0, epsilon = 1e-12);
        let b = vec![0, 1, 0, 1, 0, 1];
        assert!(adjusted_rand_index(&a, &b) < 0.2);
    }

    #[test]
    fn welch_detects_separation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.01).collect();
        let b: Vec<f64> = (0..30).map(|i| 5.0 + i as f64 * 0.01).collect();
        assert!(welch_t_pvalue(&a, &b) < 1e-6);
        assert!(welch_t_pvalue(&a, &a) > 0.99);
    }

    #[test]
    fn assignment_picks_diagonal() {
        let cost = vec![
            vec![1.0, 5.0, 5.0],
            vec![5.0, 1.0, 5.0],
            vec![5.0, 5.0, 1.0],
        ];
        assert_eq!(min_cost_assignment(&cost), vec![0, 1, 2]);
    }

    #[test]
    fn assignment_handles_fewer_rows() {
        let cost = vec![vec![9.0, 1.0, 4.0], vec![1.0, 9.0, 4.0]];
        assert_eq!(min_cost_assignment(&cost), vec![1, 0]);
    }
}
