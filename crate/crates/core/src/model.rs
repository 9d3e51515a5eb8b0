//! Binomial Markov-switching multifractal (MSM) return process.
//!
//! Returns follow `r_t = sigma_t * u_t` with `u_t ~ N(0, 1)` and
//! `sigma_t^2 = sigma^2 * prod_i M_t^(i)`. Each of the `k` multipliers takes
//! the value `m0` or `2 - m0`; at every step level `i` is renewed with
//! probability `gamma_i = 1 - (1 - gamma_k)^(b^(i - k))`, a renewal being a
//! fresh fair draw over the two values (so it may repeat the old one).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Generator used for every simulated path. The seed fully determines it.
pub type SimRng = ChaCha8Rng;

pub const DEFAULT_GAMMA_K: f64 = 0.5;
pub const DEFAULT_B: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsmParams {
    pub m0: f64,
    pub sigma: f64,
    pub k: usize,
    #[serde(default = "default_gamma_k")]
    pub gamma_k: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

fn default_gamma_k() -> f64 {
    DEFAULT_GAMMA_K
}

fn default_b() -> f64 {
    DEFAULT_B
}

impl MsmParams {
    /// Parameters with the parsimonious transition law `gamma_k = 0.5`, `b = 2`.
    pub fn new(m0: f64, sigma: f64, k: usize) -> Result<Self> {
        Self::with_transition(m0, sigma, k, DEFAULT_GAMMA_K, DEFAULT_B)
    }

    pub fn with_transition(m0: f64, sigma: f64, k: usize, gamma_k: f64, b: f64) -> Result<Self> {
        let p = MsmParams {
            m0,
            sigma,
            k,
            gamma_k,
            b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m0 >= 1.0 && self.m0 < 2.0) {
            return Err(Error::domain(format!("m0 must lie in [1, 2), got {}", self.m0)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        check_transition(self.k, self.gamma_k, self.b)
    }

    pub fn transition_probabilities(&self) -> Result<Vec<f64>> {
        transition_probabilities(self.k, self.gamma_k, self.b)
    }
}

fn check_transition(k: usize, gamma_k: f64, b: f64) -> Result<()> {
    if k < 1 {
        return Err(Error::domain("k must be at least 1"));
    }
    if !(gamma_k > 0.0 && gamma_k <= 1.0) {
        return Err(Error::domain(format!("gamma_k must lie in (0, 1], got {gamma_k}")));
    }
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::domain(format!("b must exceed 1, got {b}")));
    }
    Ok(())
}

/// Renewal probabilities `gamma_1 .. gamma_k`, lowest (slowest) level first.
pub fn transition_probabilities(k: usize, gamma_k: f64, b: f64) -> Result<Vec<f64>> {
    check_transition(k, gamma_k, b)?;
    // 1 - (1 - g)^e evaluated without cancellation, so slow levels keep
    // tiny but distinct probabilities.
    let log_stay = (-gamma_k).ln_1p();
    Ok((1..=k)
        .map(|i| {
            if i == k {
                gamma_k
            } else {
                -(b.powi(i as i32 - k as i32) * log_stay).exp_m1()
            }
        })
        .collect())
}

/// Current multiplier configuration of a cascade plus its generator.
///
/// Multipliers are kept as a selector per level (`true` = `m0`,
/// `false` = `2 - m0`) so that the variance is recomputed exactly at
/// every step instead of being accumulated.
#[derive(Debug, Clone)]
pub struct MsmState {
    m0: f64,
    at_m0: Vec<bool>,
    rng: SimRng,
}

impl MsmState {
    pub fn k(&self) -> usize {
        self.at_m0.len()
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn selectors(&self) -> &[bool] {
        &self.at_m0
    }

    pub fn multipliers(&self) -> Vec<f64> {
        let alt = 2.0 - self.m0;
        self.at_m0
            .iter()
            .map(|&hi| if hi { self.m0 } else { alt })
            .collect()
    }

    /// Number of levels currently at `m0`.
    pub fn count_m0(&self) -> usize {
        self.at_m0.iter().filter(|&&b| b).count()
    }

    /// `prod_i M^(i)`.
    pub fn product(&self) -> f64 {
        let a = self.count_m0();
        let k = self.k();
        self.m0.powi(a as i32) * (2.0 - self.m0).powi((k - a) as i32)
    }

    /// Advances every level by one period. `probs[i]` is the renewal
    /// probability of level `i + 1`.
    pub fn step(mut self, probs: &[f64]) -> Self {
        self.advance(probs);
        self
    }

    fn advance(&mut self, probs: &[f64]) {
        debug_assert_eq!(probs.len(), self.at_m0.len());
        for (bit, &p) in self.at_m0.iter_mut().zip(probs) {
            if p > 0.0 && self.rng.random::<f64>() < p {
                *bit = self.rng.random::<bool>();
            }
        }
    }

    fn draw_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Draws each multiplier independently from its stationary (fair) law.
pub fn init_state(params: &MsmParams, seed: u64) -> Result<MsmState> {
    params.validate()?;
    let mut rng = SimRng::seed_from_u64(seed);
    let at_m0 = (0..params.k).map(|_| rng.random::<bool>()).collect();
    Ok(MsmState {
        m0: params.m0,
        at_m0,
        rng,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    LogDiff,
    Diff,
    Raw,
}

/// A return series together with how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    values: Vec<f64>,
    pub transform: Transform,
    pub standardized: bool,
    pub label: String,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>, transform: Transform, label: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "return series needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite return at index {i}")));
        }
        Ok(ReturnSeries {
            values,
            transform,
            standardized: false,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    /// Multiplies every value by `c`; the standardized flag is kept only
    /// when `|c| == 1`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = ReturnSeries::new(
            self.values.iter().map(|v| v * c).collect(),
            self.transform,
            self.label.clone(),
        )?;
        out.standardized = self.standardized && c.abs() == 1.0;
        Ok(out)
    }

    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>, standardized: bool) -> Self {
        ReturnSeries {
            values,
            transform: self.transform,
            standardized,
            label: self.label.clone(),
        }
    }

    pub fn population_std(&self) -> f64 {
        stats::population_std(&self.values)
    }
}

/// One simulated period as seen by [`simulate_with`].
#[derive(Debug)]
pub struct Step<'a> {
    /// Index within the retained path (burn-in periods are not reported).
    pub t: usize,
    pub state: &'a MsmState,
    /// `sigma_t^2` used for this period.
    pub variance: f64,
    pub ret: f64,
}

/// Simulates `len` returns after discarding `burn_in` periods.
pub fn simulate(params: &MsmParams, len: usize, seed: u64, burn_in: usize) -> Result<ReturnSeries> {
    let mut values = Vec::with_capacity(len);
    simulate_with(params, len, seed, burn_in, |s| values.push(s.ret))?;
    ReturnSeries::new(values, Transform::Raw, format!("msm(m0={}, sigma={}, k={})", params.m0, params.sigma, params.k))
}

/// Same path as [`simulate`], reporting every retained period to `observe`.
pub fn simulate_with<F>(params: &MsmParams, len: usize, seed: u64, burn_in: usize, mut observe: F) -> Result<()>
where
    F: FnMut(Step<'_>),
{
    if len < 2 {
        return Err(Error::domain(format!("path length must be at least 2, got {len}")));
    }
    let probs = params.transition_probabilities()?;
    let mut state = init_state(params, seed)?;
    let sigma2 = params.sigma * params.sigma;
    for t in 0..burn_in + len {
        if t > 0 {
            state.advance(&probs);
        }
        let variance = sigma2 * state.product();
        let u = state.draw_normal();
        if t >= burn_in {
            observe(Step {
                t: t - burn_in,
                state: &state,
                variance,
                ret: variance.sqrt() * u,
            });
        }
    }
    Ok(())
}
