//! Small descriptive-statistics helpers shared by the estimators.
//!
//! Variances use the population convention (divide by `n`) throughout.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn population_std(x: &[f64]) -> f64 {
    population_variance(x).sqrt()
}

/// Nearest-rank quantile: the `ceil(p * n)`-th order statistic (1-based).
///
/// `sorted` must be ascending and non-empty; `p` in (0, 1].
pub fn nearest_rank_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Standard error of the sample mean of a dependent sequence, estimated
/// from `n_batches` non-overlapping batch means.
pub fn batch_means_std_error(x: &[f64], n_batches: usize) -> f64 {
    let batch = x.len() / n_batches;
    assert!(batch > 0, "more batches than observations");
    let means: Vec<f64> = x
        .chunks_exact(batch)
        .take(n_batches)
        .map(mean)
        .collect();
    let nb = means.len() as f64;
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nb - 1.0);
    (var / nb).sqrt()
}
