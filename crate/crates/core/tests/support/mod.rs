//! Test-only helpers shared by the property suites and the acceptance run.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use msm_core::data::to_returns;
use msm_core::model::SimRng;
use msm_core::scaling::rescaled_range;
use msm_core::{
    ghe, lo_statistic, simulate, transition_probabilities, MsmParams, PriceSeries, Transform,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn cumsum(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
fn fgn_autocov(k: usize, h: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Exact fractional Gaussian noise by sequential conditioning
/// (Durbin-Levinson recursion on the autocovariance). O(n^2).
pub fn fgn(n: usize, h: f64, seed: u64) -> Vec<f64> {
    let z = gaussian(n, seed);
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocov(k, h)).collect();
    let mut x = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    x.push(z[0] * v.sqrt());
    for t in 1..n {
        // Update the partial autocorrelation and the prediction coefficients.
        let num = gamma[t] - phi.iter().enumerate().map(|(j, p)| p * gamma[t - 1 - j]).sum::<f64>();
        let kappa = num / v;
        let prev = phi.clone();
        for j in 0..prev.len() {
            phi[j] = prev[j] - kappa * prev[prev.len() - 1 - j];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        let mean: f64 = phi.iter().enumerate().map(|(j, p)| p * x[t - 1 - j]).sum();
        x.push(mean + v.sqrt() * z[t]);
    }
    x
}

/// Jarque-Bera statistic; asymptotically chi-squared with 2 degrees of freedom.
pub fn jarque_bera(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let moment = |p: i32| x.iter().map(|v| (v - m).powi(p)).sum::<f64>() / n;
    let m2 = moment(2);
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2);
    n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0)
}

/// 99th percentile of chi-squared with 2 degrees of freedom: -2 ln(0.01).
pub const CHI2_2_99: f64 = 9.210_340_371_976_184;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn series_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 50..400)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// `lo_statistic(a x + b, tau)` equals `lo_statistic(x, tau)` for `a > 0`.
pub fn lo_scale_shift_invariance() -> Result<(), String> {
    let s = (series_strategy(), 1e-3f64..1e3, -1e3f64..1e3, 0usize..20);
    run(256, s, |(x, a, b, tau)| {
        let Ok(base) = lo_statistic(&x, tau) else {
            return Ok(());
        };
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let t = lo_statistic(&y, tau).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(close(base.q_stat, t.q_stat, 1e-8), "{base:?} vs {t:?}");
        prop_assert!(close(base.v_stat, t.v_stat, 1e-8));
        prop_assert!((base.h - t.h).abs() < 1e-8);
        prop_assert_eq!(base.reject_95, t.reject_95);
        Ok(())
    })
}

/// The generalized Hurst exponent is a ratio of moments, so scale-free.
pub fn ghe_scale_invariance() -> Result<(), String> {
    let c = prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3];
    let s = (prop::collection::vec(-10.0f64..10.0, 60..400), c, 0.5f64..3.0, 3usize..20);
    run(256, s, |(x, c, q, tau_max)| {
        let Ok(base) = ghe(&x, q, tau_max) else {
            return Ok(());
        };
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let t = ghe(&y, q, tau_max).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!((base - t).abs() < 1e-9, "{base} vs {t}");
        Ok(())
    })
}

/// With no autocovariance terms the modified statistic is the classical one, bit for bit.
pub fn tau_zero_is_classical() -> Result<(), String> {
    run(100, series_strategy(), |x| {
        let classical = rescaled_range(&x).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let modified = lo_statistic(&x, 0).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(classical.to_bits(), modified.q_stat.to_bits());
        Ok(())
    })
}

/// `h = ln Q / ln T` for every result.
pub fn lo_hurst_identity() -> Result<(), String> {
    run(128, (series_strategy(), 0usize..10), |(x, tau)| {
        if let Ok(r) = lo_statistic(&x, tau) {
            prop_assert_eq!(r.h, r.q_stat.ln() / (x.len() as f64).ln());
        }
        Ok(())
    })
}

/// Strictly increasing renewal probabilities ending exactly at `gamma_k`.
pub fn transition_monotonicity() -> Result<(), String> {
    for k in 1..=20 {
        for &gamma_k in &[0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            for &b in &[1.05, 1.5, 2.0, 3.0, 5.0, 10.0] {
                let p = transition_probabilities(k, gamma_k, b).map_err(|e| e.to_string())?;
                if p.len() != k || p[k - 1] != gamma_k {
                    return Err(format!("k={k} gamma_k={gamma_k} b={b}: last entry {}", p[k - 1]));
                }
                if let Some(w) = p.windows(2).find(|w| !(w[0] < w[1])) {
                    return Err(format!("k={k} gamma_k={gamma_k} b={b}: not increasing at {w:?}"));
                }
                if p.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
                    return Err(format!("k={k} gamma_k={gamma_k} b={b}: out of range {p:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Identical `(params, T, seed, burn_in)` give bit-identical paths.
pub fn seed_determinism() -> Result<(), String> {
    let s = (1.0f64..1.99, 0.1f64..3.0, 1usize..12, any::<u64>(), 0usize..50);
    run(64, s, |(m0, sigma, k, seed, burn)| {
        let p = MsmParams::new(m0, sigma, k).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let a = simulate(&p, 300, seed, burn).unwrap();
        let b = simulate(&p, 300, seed, burn).unwrap();
        let bits = |r: &msm_core::ReturnSeries| r.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        let c = simulate(&p, 300, seed.wrapping_add(1), burn).unwrap();
        prop_assert_ne!(bits(&a), bits(&c));
        Ok(())
    })
}

/// Exponentiated cumulative log returns reconstruct relative prices.
pub fn log_return_reconstruction() -> Result<(), String> {
    run(128, prop::collection::vec(0.01f64..1e4, 3..300), |prices| {
        let p = PriceSeries::new(prices.clone(), None, "p").unwrap();
        let r = to_returns(&p, Transform::LogDiff).unwrap();
        let mut acc = 0.0;
        for (t, v) in r.values().iter().enumerate() {
            acc += v;
            let want = prices[t + 1] / prices[0];
            prop_assert!((acc.exp() - want).abs() <= 1e-12 * want.max(1.0), "t={t}");
        }
        Ok(())
    })
}

/// Mean generalized Hurst exponent (q = 1 and 2, averaged over `tau_max` in
/// 5..=19) of cumulated fGn paths.
pub fn fgn_ghe(h: f64, paths: usize, len: usize) -> (f64, f64) {
    let set: Vec<usize> = (5..=19).collect();
    let mut acc = [0.0, 0.0];
    for p in 0..paths {
        let walk = cumsum(&fgn(len, h, 1_000 + p as u64));
        for (i, q) in [1.0, 2.0].into_iter().enumerate() {
            let hs = msm_core::scaling::ghe_over_tau_max(&walk, q, &set).unwrap();
            acc[i] += hs.iter().sum::<f64>() / hs.len() as f64;
        }
    }
    (acc[0] / paths as f64, acc[1] / paths as f64)
}

pub const FGN_HURST: [f64; 3] = [0.3, 0.5, 0.7];
pub const FGN_TOLERANCE: f64 = 0.03;

/// Recovery of `H` from cumulated fractional Gaussian noise.
pub fn fgn_self_consistency() -> Result<(), String> {
    for h in FGN_HURST {
        let (h1, h2) = fgn_ghe(h, 20, 4096);
        if (h1 - h).abs() > FGN_TOLERANCE || (h2 - h).abs() > FGN_TOLERANCE {
            return Err(format!("H = {h}: recovered H(1) = {h1:.4}, H(2) = {h2:.4}"));
        }
    }
    Ok(())
}

pub type Suite = fn() -> Result<(), String>;

/// Every property suite, by name.
pub fn property_suites() -> Vec<(&'static str, Suite)> {
    vec![
        ("lo scale/shift invariance", lo_scale_shift_invariance),
        ("ghe scale invariance", ghe_scale_invariance),
        ("tau=0 classical equality", tau_zero_is_classical),
        ("lo hurst identity", lo_hurst_identity),
        ("transition monotonicity", transition_monotonicity),
        ("seed determinism", seed_determinism),
        ("log-return reconstruction", log_return_reconstruction),
        ("fGn self-consistency", fgn_self_consistency),
    ]
}
