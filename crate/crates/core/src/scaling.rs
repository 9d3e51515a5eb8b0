//! Scaling exponents: the generalized Hurst exponent from the q-th order
//! structure function, and Lo's modified rescaled range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hac::{bartlett_weight, cross_product_sum};
use crate::model::ReturnSeries;
use crate::stats;

/// Default `tau_max` grid over which H(q) estimates are averaged.
pub const DEFAULT_TAU_MAX_SET: [usize; 15] = [5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

/// How a return series is turned into the signal analysed by the GHE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GheMode {
    /// Cumulative sum of demeaned `|r_t|`.
    #[default]
    Integrated,
    /// `|r_t|` itself.
    Raw,
}

impl std::str::FromStr for GheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrated" => Ok(GheMode::Integrated),
            "raw" => Ok(GheMode::Raw),
            other => Err(Error::domain(format!("unknown GHE mode '{other}'"))),
        }
    }
}

/// `K_q(tau) = <|x(t + tau) - x(t)|^q> / <|x(t)|^q>`.
pub fn structure_function(x: &[f64], q: f64, tau: usize) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::domain(format!("moment order must be positive, got {q}")));
    }
    if tau < 1 || x.len() <= tau {
        return Err(Error::domain(format!(
            "interval {tau} needs 1 <= tau < series length {}",
            x.len()
        )));
    }
    let denom = x.iter().map(|v| v.abs().powf(q)).sum::<f64>() / x.len() as f64;
    if denom == 0.0 {
        return Err(Error::degenerate("structure function of an identically zero series"));
    }
    let num = x[tau..]
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b).abs().powf(q))
        .sum::<f64>()
        / (x.len() - tau) as f64;
    Ok(num / denom)
}

/// `ln K_q(tau)` for `tau = 1 ..= tau_max`.
fn log_structure_curve(x: &[f64], q: f64, tau_max: usize) -> Result<Vec<f64>> {
    (1..=tau_max)
        .map(|tau| {
            let k = structure_function(x, q, tau)?;
            if k > 0.0 {
                Ok(k.ln())
            } else {
                Err(Error::degenerate(format!("K_q({tau}) is zero, no scaling to fit")))
            }
        })
        .collect()
}

fn slope_over_prefix(log_k: &[f64], tau_max: usize, q: f64) -> f64 {
    let log_tau: Vec<f64> = (1..=tau_max).map(|t| (t as f64).ln()).collect();
    stats::ols_slope(&log_tau, &log_k[..tau_max]) / q
}

/// H(q): least-squares slope of `ln K_q(tau)` on `ln tau` over
/// `tau = 1 ..= tau_max`, divided by `q`.
pub fn ghe(x: &[f64], q: f64, tau_max: usize) -> Result<f64> {
    if tau_max < 3 {
        return Err(Error::domain(format!("tau_max must be at least 3, got {tau_max}")));
    }
    let log_k = log_structure_curve(x, q, tau_max)?;
    Ok(slope_over_prefix(&log_k, tau_max, q))
}

/// H(q) for every `tau_max` in the grid; the curve is computed once.
pub fn ghe_over_tau_max(x: &[f64], q: f64, tau_max_set: &[usize]) -> Result<Vec<f64>> {
    let Some(&largest) = tau_max_set.iter().max() else {
        return Err(Error::domain("tau_max set must not be empty"));
    };
    if let Some(&bad) = tau_max_set.iter().find(|&&t| t < 3) {
        return Err(Error::domain(format!("tau_max must be at least 3, got {bad}")));
    }
    let log_k = log_structure_curve(x, q, largest)?;
    Ok(tau_max_set
        .iter()
        .map(|&t| slope_over_prefix(&log_k, t, q))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GheResult {
    pub q: f64,
    /// Mean of H(q) over the `tau_max` grid.
    pub h: f64,
    /// Population standard deviation of H(q) over the grid.
    pub h_std: f64,
    pub tau_max_set: Vec<usize>,
    pub mode: GheMode,
}

/// Signal analysed by the GHE for a given mode.
pub fn ghe_signal(r: &ReturnSeries, mode: GheMode) -> Vec<f64> {
    let abs = r.abs_values();
    match mode {
        GheMode::Raw => abs,
        GheMode::Integrated => {
            let m = stats::mean(&abs);
            abs.iter()
                .scan(0.0, |acc, v| {
                    *acc += v - m;
                    Some(*acc)
                })
                .collect()
        }
    }
}

pub fn ghe_averaged(r: &ReturnSeries, q: f64, tau_max_set: &[usize], mode: GheMode) -> Result<GheResult> {
    let x = ghe_signal(r, mode);
    let hs = ghe_over_tau_max(&x, q, tau_max_set)?;
    Ok(GheResult {
        q,
        h: stats::mean(&hs),
        h_std: stats::population_std(&hs),
        tau_max_set: tau_max_set.to_vec(),
        mode,
    })
}

/// Acceptance interval for `V_T` under the short-memory null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl AcceptanceInterval {
    pub fn rejects(&self, v: f64) -> bool {
        v < self.lower || v > self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    #[serde(rename = "0.95")]
    P95,
    #[serde(rename = "0.99")]
    P99,
}

impl ConfidenceLevel {
    pub const ALL: [ConfidenceLevel; 2] = [ConfidenceLevel::P95, ConfidenceLevel::P99];

    pub fn from_level(level: f64) -> Result<Self> {
        if (level - 0.95).abs() < 1e-12 {
            Ok(ConfidenceLevel::P95)
        } else if (level - 0.99).abs() < 1e-12 {
            Ok(ConfidenceLevel::P99)
        } else {
            Err(Error::UnsupportedLevel(level))
        }
    }

    pub fn level(self) -> f64 {
        match self {
            ConfidenceLevel::P95 => 0.95,
            ConfidenceLevel::P99 => 0.99,
        }
    }

    /// Fractiles of the Brownian-bridge range distribution.
    pub fn interval(self) -> AcceptanceInterval {
        match self {
            ConfidenceLevel::P95 => AcceptanceInterval {
                lower: 0.809,
                upper: 1.862,
            },
            ConfidenceLevel::P99 => AcceptanceInterval {
                lower: 0.721,
                upper: 2.098,
            },
        }
    }
}

/// Whether `v_stat` falls outside the acceptance interval at `level`.
pub fn rs_significance(v_stat: f64, level: f64) -> Result<bool> {
    if !(v_stat > 0.0) {
        return Err(Error::domain(format!("V statistic must be positive, got {v_stat}")));
    }
    Ok(ConfidenceLevel::from_level(level)?.interval().rejects(v_stat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoResult {
    pub tau: usize,
    pub q_stat: f64,
    pub v_stat: f64,
    pub h: f64,
    pub reject_95: bool,
    pub reject_99: bool,
}

impl LoResult {
    fn from_q(tau: usize, q_stat: f64, len: usize) -> Self {
        let n = len as f64;
        let v_stat = q_stat / n.sqrt();
        LoResult {
            tau,
            q_stat,
            v_stat,
            h: lo_hurst(q_stat, len),
            reject_95: ConfidenceLevel::P95.interval().rejects(v_stat),
            reject_99: ConfidenceLevel::P99.interval().rejects(v_stat),
        }
    }
}

/// `ln Q / ln T`.
pub fn lo_hurst(q_stat: f64, len: usize) -> f64 {
    q_stat.ln() / (len as f64).ln()
}

/// Deviations from the mean and the range of their partial sums.
fn demeaned_range(x: &[f64]) -> (Vec<f64>, f64) {
    let m = stats::mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut acc = 0.0;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for v in &d {
        acc += v;
        hi = hi.max(acc);
        lo = lo.min(acc);
    }
    (d, hi - lo)
}

fn check_lo_input(x: &[f64], tau: usize) -> Result<()> {
    if x.len() <= tau + 2 {
        return Err(Error::domain(format!(
            "series of length {} is too short for truncation lag {tau}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    Ok(())
}

/// Classical rescaled range `R / S` with the population standard deviation.
pub fn rescaled_range(x: &[f64]) -> Result<f64> {
    check_lo_input(x, 0)?;
    let (d, range) = demeaned_range(x);
    let s2 = cross_product_sum(&d, 0) / x.len() as f64;
    if !(s2 > 0.0) {
        return Err(Error::degenerate("series has zero variance"));
    }
    Ok(range / s2.sqrt())
}

/// Lo's modified rescaled range with Bartlett-weighted autocovariances up to `tau`.
pub fn lo_statistic(x: &[f64], tau: usize) -> Result<LoResult> {
    check_lo_input(x, tau)?;
    let n = x.len();
    let (d, range) = demeaned_range(x);
    let mut s2 = cross_product_sum(&d, 0) / n as f64;
    for j in 1..=tau {
        s2 += 2.0 / n as f64 * bartlett_weight(j, tau) * cross_product_sum(&d, j);
    }
    if !(s2 > 0.0) {
        return Err(Error::degenerate(format!(
            "long-run variance estimate {s2} is not positive at tau = {tau}"
        )));
    }
    Ok(LoResult::from_q(tau, range / s2.sqrt(), n))
}

/// Lo statistics of `|r_t|` for each truncation lag.
pub fn lo_volatility(r: &ReturnSeries, tau_set: &[usize]) -> Result<Vec<LoResult>> {
    let x = r.abs_values();
    tau_set.iter().map(|&tau| lo_statistic(&x, tau)).collect()
}

/// GHE and Lo results for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub label: String,
    pub length: usize,
    pub ghe: Vec<GheResult>,
    pub lo: Vec<LoResult>,
}

impl ScalingReport {
    pub fn ghe_for(&self, q: f64) -> Option<&GheResult> {
        self.ghe.iter().find(|g| g.q == q)
    }

    pub fn lo_for(&self, tau: usize) -> Option<&LoResult> {
        self.lo.iter().find(|l| l.tau == tau)
    }
}

pub fn scaling_report(
    r: &ReturnSeries,
    q_set: &[f64],
    tau_max_set: &[usize],
    mode: GheMode,
    tau_set: &[usize],
) -> Result<ScalingReport> {
    if let Some(&t) = tau_max_set.iter().max() {
        if t >= r.len() {
            return Err(Error::domain(format!(
                "series of length {} is shorter than tau_max {t}",
                r.len()
            )));
        }
    }
    let ghe = q_set
        .iter()
        .map(|&q| ghe_averaged(r, q, tau_max_set, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingReport {
        label: r.label.clone(),
        length: r.len(),
        ghe,
        lo: lo_volatility(r, tau_set)?,
    })
}
