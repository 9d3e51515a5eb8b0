//! Newey-West (Bartlett kernel) long-run covariance estimators.

use nalgebra::DMatrix;

/// Bartlett weight `1 - j / (lag + 1)`.
pub fn bartlett_weight(j: usize, lag: usize) -> f64 {
    1.0 - j as f64 / (lag as f64 + 1.0)
}

/// Plug-in truncation lag `floor(n^(1/4))`.
pub fn default_lag(n: usize) -> usize {
    (n as f64).powf(0.25).floor() as usize
}

/// `sum_{i=j}^{n-1} d_i d_{i-j}` for a sequence of deviations `d`.
pub fn cross_product_sum(d: &[f64], j: usize) -> f64 {
    d[j..].iter().zip(d).map(|(a, b)| a * b).sum()
}

/// Newey-West covariance of the vector sequence `rows` (n x m),
/// `Gamma_0 + sum_{j=1}^{lag} w_j (Gamma_j + Gamma_j')` with
/// `Gamma_j = (1/n) sum_t h_t h_{t-j}'`. Rows are used as given, no
/// re-centering is applied.
pub fn newey_west(rows: &[Vec<f64>], lag: usize) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let h = DMatrix::from_fn(n, m, |t, j| rows[t][j]);
    let mut s = h.transpose() * &h;
    for j in 1..=lag.min(n.saturating_sub(1)) {
        let lead = h.rows(j, n - j);
        let lagged = h.rows(0, n - j);
        let gamma = lead.transpose() * lagged;
        let w = bartlett_weight(j, lag);
        s += (&gamma + gamma.transpose()) * w;
    }
    s / n as f64
}
