//! Moment conditions of the binomial MSM in terms of log-absolute returns.
//!
//! With `xi_{t,T} = ln|r_t| - ln|r_{t-T}|`, the centered log multiplier of
//! level `i` is a symmetric two-state chain with amplitude
//! `lambda = (ln m0 - ln(2 - m0)) / 2` and `T`-step autocorrelation
//! `rho_i(T) = (1 - gamma_i)^T`. This gives, per lag `T`,
//!
//! ```text
//! E[xi^2]               =  sum_i 0.5  * lambda^2 * (1 - rho_i(T))   + 2 Var[ln|u|]
//! E[xi_{t,T} xi_{t-T,T}] = -sum_i 0.25 * lambda^2 * (1 - rho_i(T))^2 -   Var[ln|u|]
//! ```
//!
//! and `E[r^2] = sigma^2` because every multiplier has unit mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MsmParams, ReturnSeries};

/// Moments of `ln|u|` for `u ~ N(0, 1)`: mean `-(euler_gamma + ln 2) / 2`,
/// variance `pi^2 / 8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogAbsNormalMoments {
    pub mean: f64,
    pub variance: f64,
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const LOG_ABS_NORMAL: LogAbsNormalMoments = LogAbsNormalMoments {
    mean: -(EULER_GAMMA + std::f64::consts::LN_2) / 2.0,
    variance: std::f64::consts::PI * std::f64::consts::PI / 8.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Analytic,
    Empirical,
}

/// Moment values laid out as `[E xi^2(T_1), E xi xi(T_1), ..., E xi^2(T_n), E xi xi(T_n), E r^2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub kind: MomentKind,
}

impl MomentVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xi_sq(&self, lag_index: usize) -> f64 {
        self.values[2 * lag_index]
    }

    pub fn xi_cross(&self, lag_index: usize) -> f64 {
        self.values[2 * lag_index + 1]
    }

    pub fn r_sq(&self) -> f64 {
        *self.values.last().expect("moment vector is never empty")
    }
}

pub(crate) fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::domain("lag set must not be empty"));
    }
    if lags[0] == 0 {
        return Err(Error::domain("lags must be positive"));
    }
    if lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("lags must be strictly ascending"));
    }
    Ok(())
}

fn half_log_spread(m0: f64) -> f64 {
    (m0.ln() - (2.0 - m0).ln()) / 2.0
}

/// Sums over levels of `1 - rho_i(T)` and `(1 - rho_i(T))^2`.
fn decorrelation_sums(probs: &[f64], lag: usize) -> (f64, f64) {
    probs.iter().fold((0.0, 0.0), |(a, b), &g| {
        let d = 1.0 - (1.0 - g).powi(lag as i32);
        (a + d, b + d * d)
    })
}

pub fn analytic_moments(params: &MsmParams, lags: &[usize]) -> Result<MomentVector> {
    params.validate()?;
    check_lags(lags)?;
    let table = DecorrelationTable::new(&params.transition_probabilities()?, lags);
    Ok(MomentVector {
        lags: lags.to_vec(),
        values: table.moments(params.m0, params.sigma),
        kind: MomentKind::Analytic,
    })
}

/// Per-lag level sums that do not depend on `(m0, sigma)`, so moment
/// evaluation inside an optimizer loop is O(number of lags).
#[derive(Debug, Clone)]
pub(crate) struct DecorrelationTable {
    sums: Vec<(f64, f64)>,
}

impl DecorrelationTable {
    pub(crate) fn new(probs: &[f64], lags: &[usize]) -> Self {
        DecorrelationTable {
            sums: lags.iter().map(|&lag| decorrelation_sums(probs, lag)).collect(),
        }
    }

    pub(crate) fn moments(&self, m0: f64, sigma: f64) -> Vec<f64> {
        let lambda_sq = half_log_spread(m0).powi(2);
        let v = LOG_ABS_NORMAL.variance;
        let mut values = Vec::with_capacity(2 * self.sums.len() + 1);
        for &(s1, s2) in &self.sums {
            values.push(0.5 * lambda_sq * s1 + 2.0 * v);
            values.push(-0.25 * lambda_sq * s2 - v);
        }
        values.push(sigma * sigma);
        values
    }
}

/// Derivatives of [`analytic_moments`] with respect to `(m0, sigma)`,
/// one `[d/dm0, d/dsigma]` pair per moment.
pub fn analytic_jacobian(params: &MsmParams, lags: &[usize]) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    check_lags(lags)?;
    let probs = params.transition_probabilities()?;
    let m0 = params.m0;
    let lambda = half_log_spread(m0);
    let dlambda = 0.5 * (1.0 / m0 + 1.0 / (2.0 - m0));
    let dlambda_sq = 2.0 * lambda * dlambda;
    let mut jac = Vec::with_capacity(2 * lags.len() + 1);
    for &lag in lags {
        let (s1, s2) = decorrelation_sums(&probs, lag);
        jac.push([0.5 * dlambda_sq * s1, 0.0]);
        jac.push([-0.25 * dlambda_sq * s2, 0.0]);
    }
    jac.push([0.0, 2.0 * params.sigma]);
    Ok(jac)
}

/// Per-observation moment functions aligned on a common time index.
///
/// Row `j` corresponds to `t = 2 * max_lag + j`. Entries that involve a
/// zero return are `None`; they are excluded from the moment means.
#[derive(Debug, Clone)]
pub struct MomentObservations {
    pub lags: Vec<usize>,
    rows: Vec<Vec<Option<f64>>>,
    /// Number of zero returns in the input series.
    pub zero_returns: usize,
}

impl MomentObservations {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_moments(&self) -> usize {
        2 * self.lags.len() + 1
    }

    /// Column means over the defined entries.
    pub fn means(&self) -> Vec<f64> {
        let m = self.n_moments();
        let mut sum = vec![0.0; m];
        let mut count = vec![0usize; m];
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    sum[j] += v;
                    count[j] += 1;
                }
            }
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
    }

    /// Rows of `centre - observation`; undefined entries take the column mean.
    ///
    /// With `centre` equal to the model moments this is the per-period GMM
    /// moment function `g_t(theta)`.
    pub fn deviations(&self, centre: &[f64]) -> Vec<Vec<f64>> {
        let means = self.means();
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| centre[j] - v.unwrap_or(means[j]))
                    .collect()
            })
            .collect()
    }
}

pub fn moment_observations(series: &ReturnSeries, lags: &[usize]) -> Result<MomentObservations> {
    check_lags(lags)?;
    let r = series.values();
    let max_lag = *lags.last().expect("checked non-empty");
    if r.len() <= 2 * max_lag + 10 {
        return Err(Error::domain(format!(
            "series of length {} is too short for lag {max_lag} (need more than {})",
            r.len(),
            2 * max_lag + 10
        )));
    }
    let zero_returns = r.iter().filter(|&&v| v == 0.0).count();
    let usable = r.len() - zero_returns;
    if usable < 30 {
        return Err(Error::degenerate(format!(
            "only {usable} non-zero returns available, need at least 30"
        )));
    }
    if zero_returns > 0 {
        log::warn!("dropping {zero_returns} zero returns from log-moment computation");
    }
    let log_abs: Vec<Option<f64>> = r
        .iter()
        .map(|&v| if v == 0.0 { None } else { Some(v.abs().ln()) })
        .collect();
    let xi = |t: usize, lag: usize| -> Option<f64> { Some(log_abs[t]? - log_abs[t - lag]?) };

    let rows = (2 * max_lag..r.len())
        .map(|t| {
            let mut row = Vec::with_capacity(2 * lags.len() + 1);
            for &lag in lags {
                let now = xi(t, lag);
                let prev = xi(t - lag, lag);
                row.push(now.map(|a| a * a));
                row.push(now.zip(prev).map(|(a, b)| a * b));
            }
            row.push(Some(r[t] * r[t]));
            row
        })
        .collect::<Vec<_>>();

    let obs = MomentObservations {
        lags: lags.to_vec(),
        rows,
        zero_returns,
    };
    let defined = (0..obs.n_moments()).all(|j| obs.rows.iter().any(|row| row[j].is_some()));
    if !defined {
        return Err(Error::degenerate(
            "a moment condition has no usable observation after dropping zero returns",
        ));
    }
    Ok(obs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub moments: MomentVector,
    pub zero_returns: usize,
    pub observations: usize,
}

pub fn empirical_moments(series: &ReturnSeries, lags: &[usize]) -> Result<EmpiricalMoments> {
    let obs = moment_observations(series, lags)?;
    Ok(EmpiricalMoments {
        moments: MomentVector {
            lags: lags.to_vec(),
            values: obs.means(),
            kind: MomentKind::Empirical,
        },
        zero_returns: obs.zero_returns,
        observations: obs.n_rows(),
    })
}
