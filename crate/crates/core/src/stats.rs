//! Rank and significance-test helpers shared by the metrics and racing
//! modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Average ranks (1-based) with tied values sharing their mean rank.
/// Exact equality defines a tie; classifier scores are vote fractions, so
/// equal scores compare equal exactly.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Upper-tail chi-square probability `P(X >= x)` with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("df > 0");
    (1.0 - dist.cdf(x)).clamp(0.0, 1.0)
}

/// One-sided paired t-test p-value for the hypothesis "first sample tends
/// larger". `diffs` are paired differences (first - second); small p means
/// the first is significantly larger.
pub fn paired_t_pvalue(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    if n < 2 {
        return 1.0;
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        // Constant differences: direction alone decides.
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("df >= 1");
    (1.0 - dist.cdf(t)).clamp(0.0, 1.0)
}

/// One-sided Wilcoxon signed-rank p-value (normal approximation with
/// continuity correction, zeros dropped, average ranks for ties). Small p
/// means the first sample of the pairing tends larger.
pub fn wilcoxon_signed_rank_pvalue(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
    if sd == 0.0 {
        return if w_plus > mean { 0.0 } else { 1.0 };
    }
    let z = (w_plus - mean - 0.5) / sd;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (1.0 - normal.cdf(z)).clamp(0.0, 1.0)
}

/// Friedman rank test over a block design: `scores[block][candidate]`.
/// Returns the chi-square statistic and its upper-tail p-value with
/// `k - 1` degrees of freedom. All-tied blocks yield `(0, 1)`.
pub fn friedman_test(scores: &[Vec<f64>]) -> (f64, f64) {
    let n = scores.len();
    let k = scores[0].len();
    debug_assert!(n >= 2 && k >= 2);
    debug_assert!(scores.iter().all(|row| row.len() == k));

    let mut rank_sums = vec![0.0; k];
    for row in scores {
        for (j, r) in average_ranks(row).into_iter().enumerate() {
            rank_sums[j] += r;
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let statistic = (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    (statistic, chi_square_sf(statistic, kf - 1.0))
}
