//! Shared numerical primitives: normal CDF, empirical quantiles, correlation,
//! Brier score, and the within/between variance aggregator.

use crate::error::{Error, Result};
use ndarray::ArrayView2;

/// Mean of a slice. Returns 0 for empty input (callers guard lengths).
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n−1) sample variance; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation (n−1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Standard normal CDF via the complementary error function,
/// Φ(z) = erfc(−z/√2)/2. Absolute error well below 1e−12.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse-CDF (type-1) empirical quantile: the smallest observed value `x`
/// with F(x) ≥ `level`. Always returns a member of `values`.
pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "empirical_quantile: empty input".into(),
        ));
    }
    if !(0.0..=1.0).contains(&level) || !level.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "empirical_quantile: level {level} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    // Smallest i with (i+1)/n ≥ level, i.e. i = ceil(n·level) − 1. The tiny
    // slack keeps a float product like n·level = m + 1e−13 from bumping the
    // index past the exact order statistic.
    let t = n as f64 * level;
    let k = (t - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(n) - 1])
}

/// Per-scenario mean and its combined uncertainty: the average within-scenario
/// variance plus the between-scenario sample variance of the means.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AggregateStat {
    pub mean: f64,
    pub within_var_mean: f64,
    pub between_var: f64,
    pub combined_se: f64,
    /// `mean ± 2·combined_se`.
    pub band: (f64, f64),
}

/// Combine `(mean, variance)` pairs from several scenarios into one
/// [`AggregateStat`]: combined variance = mean of within-variances + sample
/// variance of the means, reported as an SE with a ±2·SE band.
pub fn combine_variance(per_scenario: &[(f64, f64)]) -> Result<AggregateStat> {
    if per_scenario.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "combine_variance: need at least 2 scenarios, got {}",
            per_scenario.len()
        )));
    }
    let means: Vec<f64> = per_scenario.iter().map(|s| s.0).collect();
    let within: Vec<f64> = per_scenario.iter().map(|s| s.1).collect();
    let within_var_mean = mean(&within);
    let between_var = sample_variance(&means);
    let combined_se = (within_var_mean + between_var).sqrt();
    let m = mean(&means);
    Ok(AggregateStat {
        mean: m,
        within_var_mean,
        between_var,
        combined_se,
        band: (m - 2.0 * combined_se, m + 2.0 * combined_se),
    })
}

/// Product-moment (Pearson) correlation. Errors on constant input, where the
/// correlation is undefined.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson: need two equal-length inputs of length ≥ 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant input to pearson".into(),
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks with ties sharing their average (midrank), 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) hold a tied group; its midrank is
        // the average of 1-based ranks start+1 ..= end.
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = midrank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(&midranks(a), &midranks(b))
}

/// Mean squared error between predictions and targets (single-output case).
pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), y.len());
    let n = pred.len().max(1);
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n as f64
}

/// Brier score for class-probability predictions: mean over all n·C entries
/// of the squared difference between predicted probabilities and the one-hot
/// encoding of the labels. Lower is better; its negation is a proper score.
pub fn brier_score(probs: &ArrayView2<f64>, labels: &[usize]) -> f64 {
    let (n, c) = probs.dim();
    debug_assert_eq!(n, labels.len());
    let mut total = 0.0;
    for (i, row) in probs.outer_iter().enumerate() {
        for (k, p) in row.iter().enumerate() {
            let target = if labels[i] == k { 1.0 } else { 0.0 };
            total += (p - target) * (p - target);
        }
    }
    total / (n * c) as f64
}

/// Classification accuracy with ties broken toward the lowest class index.
pub fn accuracy(probs: &ArrayView2<f64>, labels: &[usize]) -> f64 {
    let n = probs.nrows();
    debug_assert_eq!(n, labels.len());
    let mut correct = 0usize;
    for (i, row) in probs.outer_iter().enumerate() {
        let mut best = 0usize;
        for (k, p) in row.iter().enumerate() {
            if *p > row[best] {
                best = k;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}
