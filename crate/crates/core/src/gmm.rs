//! Two-stage (optionally iterated) GMM estimation of `(m0, sigma)` for a
//! binomial MSM with a fixed number of cascade levels.
//!
//! The moment function is `g_t(theta) = analytic(theta) - observation_t`
//! over the conditions of [`crate::moments`]. The first stage weights the
//! conditions equally after dividing the `E[r^2]` condition by its sample
//! value (so the estimate does not depend on the units of the returns);
//! later stages use the inverse Newey-West covariance of `g_t` evaluated at
//! the previous estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hac;
use crate::model::{transition_probabilities, ReturnSeries, DEFAULT_B, DEFAULT_GAMMA_K};
use crate::moments::{analytic_jacobian, moment_observations, DecorrelationTable, MomentObservations};
use crate::optimize::{nelder_mead, Bounds, NelderMeadOptions};
use crate::MsmParams;

pub const M0_LOWER: f64 = 1.0 + 1e-6;
pub const M0_UPPER: f64 = 2.0 - 1e-6;
const BOUNDARY_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub lags: Vec<usize>,
    /// Bartlett truncation lag; `None` means `floor(n^(1/4))`.
    pub hac_lag: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub m0_starts: Vec<f64>,
    /// Starting values for sigma as multiples of the sample RMS return.
    pub sigma_start_scales: Vec<f64>,
    /// Keep re-weighting until the estimate stops moving.
    pub iterated: bool,
    pub max_weighting_iterations: usize,
    pub gamma_k: f64,
    pub b: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            lags: vec![1, 5, 10, 20],
            hac_lag: None,
            tolerance: 1e-8,
            max_iterations: 5_000,
            m0_starts: vec![1.1, 1.3, 1.5, 1.7, 1.9],
            sigma_start_scales: vec![0.5, 1.0, 2.0],
            iterated: false,
            max_weighting_iterations: 50,
            gamma_k: DEFAULT_GAMMA_K,
            b: DEFAULT_B,
        }
    }
}

/// One row of a GMM estimates table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmResult {
    pub k: usize,
    pub m0_hat: f64,
    pub sigma_hat: f64,
    pub se_m0: f64,
    pub se_sigma: f64,
    pub j_statistic: f64,
    /// Number of weighting stages run (2 for two-stage GMM).
    pub iterations: usize,
    pub converged: bool,
    /// `m0_hat` ended within 1e-4 of the parameter bounds.
    pub at_boundary: bool,
    pub observations: usize,
    pub zero_returns: usize,
}

impl GmmResult {
    pub fn std_errors(&self) -> (f64, f64) {
        (self.se_m0, self.se_sigma)
    }

    pub fn params(&self, config: &GmmConfig) -> Result<MsmParams> {
        MsmParams::with_transition(self.m0_hat, self.sigma_hat, self.k, config.gamma_k, config.b)
    }
}

struct Problem {
    obs: MomentObservations,
    empirical: Vec<f64>,
    table: DecorrelationTable,
    sigma_ref: f64,
}

impl Problem {
    /// `analytic(theta) - empirical` with `theta = (m0, sigma / sigma_ref)`.
    fn mean_moment(&self, theta: &[f64]) -> Vec<f64> {
        self.table
            .moments(theta[0], theta[1] * self.sigma_ref)
            .iter()
            .zip(&self.empirical)
            .map(|(a, e)| a - e)
            .collect()
    }

    fn objective(&self, theta: &[f64], w: &DMatrix<f64>) -> f64 {
        let g = DVector::from_vec(self.mean_moment(theta));
        (g.transpose() * w * &g)[(0, 0)]
    }

    fn long_run_covariance(&self, theta: &[f64], lag: usize) -> DMatrix<f64> {
        let model = self.table.moments(theta[0], theta[1] * self.sigma_ref);
        hac::newey_west(&self.obs.deviations(&model), lag)
    }
}

struct StageFit {
    theta: Vec<f64>,
    converged: bool,
}

fn minimize(problem: &Problem, w: &DMatrix<f64>, config: &GmmConfig) -> StageFit {
    let bounds = Bounds {
        lower: vec![M0_LOWER, 1e-8],
        upper: vec![M0_UPPER, f64::INFINITY],
    };
    let opts = NelderMeadOptions {
        f_tol: config.tolerance,
        x_tol: 1e-7,
        max_iterations: config.max_iterations,
    };
    let mut best: Option<(f64, StageFit)> = None;
    for &m0 in &config.m0_starts {
        for &s in &config.sigma_start_scales {
            let start = [m0.clamp(M0_LOWER, M0_UPPER), s];
            let step = [0.05, 0.1 * s];
            let f = |x: &[f64]| problem.objective(x, w);
            let mut m = nelder_mead(f, &start, &step, &bounds, opts);
            // One restart from the reported minimum guards against a
            // collapsed simplex on the flat stretch near m0 = 1.
            let step = [0.01, 0.01 * m.x[1]];
            let again = nelder_mead(|x: &[f64]| problem.objective(x, w), &m.x, &step, &bounds, opts);
            if again.value <= m.value {
                m.x = again.x;
                m.value = again.value;
                m.converged = again.converged;
            }
            if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                best = Some((
                    m.value,
                    StageFit {
                        theta: m.x,
                        converged: m.converged,
                    },
                ));
            }
        }
    }
    best.expect("multistart grid is non-empty").1
}

fn invert_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    s.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("moment covariance matrix is not positive definite".into()))
}

/// Estimates `(m0, sigma)` for a cascade with `k` levels.
pub fn gmm_estimate(series: &ReturnSeries, k: usize, config: &GmmConfig) -> Result<GmmResult> {
    if config.m0_starts.is_empty() || config.sigma_start_scales.is_empty() {
        return Err(Error::domain("multistart grid must not be empty"));
    }
    let probs = transition_probabilities(k, config.gamma_k, config.b)?;
    let obs = moment_observations(series, &config.lags)?;
    let empirical = obs.means();
    let sigma_ref = empirical.last().copied().unwrap_or(0.0).sqrt();
    if !(sigma_ref > 0.0) {
        return Err(Error::degenerate("series has zero second moment"));
    }
    let n = obs.n_rows();
    let lag = config.hac_lag.unwrap_or_else(|| hac::default_lag(n));
    let m = obs.n_moments();
    let problem = Problem {
        table: DecorrelationTable::new(&probs, &config.lags),
        empirical,
        obs,
        sigma_ref,
    };

    let mut w = DMatrix::<f64>::identity(m, m);
    w[(m - 1, m - 1)] = 1.0 / sigma_ref.powi(4);
    let mut fit = minimize(&problem, &w, config);
    let mut stages = 1;
    let max_stages = if config.iterated {
        config.max_weighting_iterations.max(2)
    } else {
        2
    };
    while stages < max_stages {
        let s = problem.long_run_covariance(&fit.theta, lag);
        w = invert_spd(&s)?;
        let next = minimize(&problem, &w, config);
        stages += 1;
        let moved = next
            .theta
            .iter()
            .zip(&fit.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        fit = next;
        if moved < 1e-7 {
            break;
        }
    }

    let m0_hat = fit.theta[0];
    let sigma_hat = fit.theta[1] * sigma_ref;
    let params = MsmParams::with_transition(m0_hat, sigma_hat, k, config.gamma_k, config.b)?;

    let s = problem.long_run_covariance(&fit.theta, lag);
    let s_inv = invert_spd(&s)?;
    let g = DVector::from_vec(problem.mean_moment(&fit.theta));
    let j_statistic = n as f64 * (g.transpose() * &s_inv * &g)[(0, 0)];

    // Weighting in terms of sigma rather than the scaled coordinate.
    let jac = analytic_jacobian(&params, &config.lags)?;
    let gmat = DMatrix::from_fn(m, 2, |i, j| jac[i][j]);
    let bread = gmat.transpose() * &w * &gmat;
    let (se_m0, se_sigma) = match bread.try_inverse() {
        Some(b_inv) => {
            let meat = gmat.transpose() * &w * &s * &w * &gmat;
            let cov = &b_inv * meat * &b_inv / n as f64;
            (cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt())
        }
        None => (f64::INFINITY, f64::INFINITY),
    };

    Ok(GmmResult {
        k,
        m0_hat,
        sigma_hat,
        se_m0,
        se_sigma,
        j_statistic,
        iterations: stages,
        converged: fit.converged,
        at_boundary: m0_hat - 1.0 < BOUNDARY_MARGIN || 2.0 - m0_hat < BOUNDARY_MARGIN,
        observations: n,
        zero_returns: problem.obs.zero_returns,
    })
}
