//! Replication harness: simulate an MSM ensemble per cascade depth, compute
//! scaling statistics on every path and summarise them.
//!
//! Replication `r` of depth `k` is simulated from a seed derived from
//! `(master_seed, k, r)` alone, so results do not depend on scheduling.
//! Aggregation always runs in replication order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate, MsmParams};
use crate::scaling::{self, AcceptanceInterval, ConfidenceLevel, GheMode, DEFAULT_TAU_MAX_SET};
use crate::stats;

pub const PAPER_LENGTH: usize = 9372;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    /// Replications used for the generalized Hurst exponents.
    pub ghe_reps: usize,
    /// Replications used for Lo's statistic.
    pub lo_reps: usize,
    pub length: usize,
    pub burn_in: usize,
    pub k_set: Vec<usize>,
    pub tau_set: Vec<usize>,
    pub q_set: Vec<f64>,
    pub tau_max_set: Vec<usize>,
    pub ghe_mode: GheMode,
    pub master_seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            ghe_reps: 100,
            lo_reps: 1000,
            length: PAPER_LENGTH,
            burn_in: 0,
            k_set: vec![5, 10, 15, 20],
            tau_set: vec![0, 5, 10, 25, 50, 100],
            q_set: vec![1.0, 2.0],
            tau_max_set: DEFAULT_TAU_MAX_SET.to_vec(),
            ghe_mode: GheMode::Integrated,
            master_seed: 20_060_101,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ghe_reps == 0 || self.lo_reps == 0 {
            return Err(Error::domain("replication counts must be at least 1"));
        }
        if self.length < 2 {
            return Err(Error::domain("path length must be at least 2"));
        }
        if let Some(&t) = self.tau_max_set.iter().max() {
            if t >= self.length {
                return Err(Error::domain(format!("tau_max {t} exceeds path length {}", self.length)));
            }
        }
        if let Some(&t) = self.tau_set.iter().max() {
            if t + 2 >= self.length {
                return Err(Error::domain(format!("truncation lag {t} too large for path length {}", self.length)));
            }
        }
        if self.q_set.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::domain("moment orders must be positive"));
        }
        Ok(())
    }

    fn replications(&self) -> usize {
        self.ghe_reps.max(self.lo_reps)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` for cascade depth `k`.
pub fn replication_seed(master_seed: u64, k: usize, rep: usize) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ (k as u64).wrapping_mul(GOLDEN));
    splitmix64(b ^ (rep as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Which statistic a column of ensemble values holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Ghe { q: f64 },
    LoV { tau: usize },
    LoH { tau: usize },
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Ghe { q } => write!(f, "H({q})"),
            Statistic::LoV { tau } => write!(f, "V(tau={tau})"),
            Statistic::LoH { tau } => write!(f, "LoH(tau={tau})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub k: usize,
    pub statistic: Statistic,
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub quantile_2_5: f64,
    pub quantile_97_5: f64,
    pub n_reps: usize,
    pub excluded: usize,
    /// Rejections of the short-memory null, for `V` statistics only.
    pub reject_95: Option<usize>,
    pub reject_99: Option<usize>,
}

/// Per-path values for one cascade depth, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEnsemble {
    pub k: usize,
    pub params: MsmParams,
    pub ghe: Vec<(f64, Vec<f64>)>,
    pub lo_v: Vec<(usize, Vec<f64>)>,
    pub lo_h: Vec<(usize, Vec<f64>)>,
    pub ghe_excluded: usize,
    pub lo_excluded: usize,
}

impl KEnsemble {
    pub fn values(&self, stat: Statistic) -> Option<&[f64]> {
        match stat {
            Statistic::Ghe { q } => self.ghe.iter().find(|(x, _)| *x == q).map(|(_, v)| v.as_slice()),
            Statistic::LoV { tau } => self.lo_v.iter().find(|(t, _)| *t == tau).map(|(_, v)| v.as_slice()),
            Statistic::LoH { tau } => self.lo_h.iter().find(|(t, _)| *t == tau).map(|(_, v)| v.as_slice()),
        }
    }

    pub fn statistics(&self) -> Vec<Statistic> {
        let ghe = self.ghe.iter().map(|(q, _)| Statistic::Ghe { q: *q });
        let v = self.lo_v.iter().map(|(tau, _)| Statistic::LoV { tau: *tau });
        let h = self.lo_h.iter().map(|(tau, _)| Statistic::LoH { tau: *tau });
        ghe.chain(v).chain(h).collect()
    }

    pub fn summary(&self, stat: Statistic) -> Option<McSummary> {
        let values = self.values(stat)?;
        let excluded = match stat {
            Statistic::Ghe { .. } => self.ghe_excluded,
            _ => self.lo_excluded,
        };
        Some(summarize(self.k, stat, values, excluded))
    }

    pub fn summaries(&self) -> Vec<McSummary> {
        self.statistics()
            .into_iter()
            .filter_map(|s| self.summary(s))
            .collect()
    }
}

fn summarize(k: usize, statistic: Statistic, values: &[f64], excluded: usize) -> McSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, std, q_lo, q_hi) = if sorted.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            stats::mean(values),
            stats::population_std(values),
            stats::nearest_rank_quantile(&sorted, 0.025),
            stats::nearest_rank_quantile(&sorted, 0.975),
        )
    };
    let (reject_95, reject_99) = match statistic {
        Statistic::LoV { .. } => (
            Some(rejection_count(values, ConfidenceLevel::P95.interval())),
            Some(rejection_count(values, ConfidenceLevel::P99.interval())),
        ),
        _ => (None, None),
    };
    McSummary {
        k,
        statistic,
        label: statistic.to_string(),
        mean,
        std,
        quantile_2_5: q_lo,
        quantile_97_5: q_hi,
        n_reps: values.len(),
        excluded,
        reject_95,
        reject_99,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEnsemble {
    pub config: McConfig,
    pub per_k: Vec<KEnsemble>,
}

impl McEnsemble {
    pub fn get(&self, k: usize) -> Option<&KEnsemble> {
        self.per_k.iter().find(|e| e.k == k)
    }

    pub fn summaries(&self) -> Vec<McSummary> {
        self.per_k.iter().flat_map(KEnsemble::summaries).collect()
    }

    pub fn total_excluded(&self) -> usize {
        self.per_k.iter().map(|e| e.ghe_excluded + e.lo_excluded).sum()
    }
}

enum Outcome<T> {
    Skipped,
    Failed,
    Done(T),
}

impl<T> Outcome<T> {
    fn failed_if(wanted: bool) -> Self {
        if wanted {
            Outcome::Failed
        } else {
            Outcome::Skipped
        }
    }
}

struct Replication {
    ghe: Outcome<Vec<f64>>,
    lo: Outcome<Vec<(f64, f64)>>,
}

fn run_replication(params: &MsmParams, config: &McConfig, rep: usize) -> Replication {
    let seed = replication_seed(config.master_seed, params.k, rep);
    let want_ghe = rep < config.ghe_reps;
    let want_lo = rep < config.lo_reps;
    let path = match simulate(params, config.length, seed, config.burn_in) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("k={} replication {rep}: simulation failed: {e}", params.k);
            return Replication {
                ghe: Outcome::failed_if(want_ghe),
                lo: Outcome::failed_if(want_lo),
            };
        }
    };
    let ghe = if want_ghe {
        let r: Result<Vec<f64>> = config
            .q_set
            .iter()
            .map(|&q| scaling::ghe_averaged(&path, q, &config.tau_max_set, config.ghe_mode).map(|g| g.h))
            .collect();
        match r {
            Ok(v) => Outcome::Done(v),
            Err(e) => {
                log::warn!("k={} replication {rep}: GHE failed: {e}", params.k);
                Outcome::Failed
            }
        }
    } else {
        Outcome::Skipped
    };
    let lo = if want_lo {
        match scaling::lo_volatility(&path, &config.tau_set) {
            Ok(v) => Outcome::Done(v.into_iter().map(|l| (l.v_stat, l.h)).collect()),
            Err(e) => {
                log::warn!("k={} replication {rep}: Lo statistic failed: {e}", params.k);
                Outcome::Failed
            }
        }
    } else {
        Outcome::Skipped
    };
    Replication { ghe, lo }
}

fn run_one_k(params: &MsmParams, config: &McConfig) -> KEnsemble {
    let reps: Vec<Replication> = (0..config.replications())
        .into_par_iter()
        .map(|rep| run_replication(params, config, rep))
        .collect();

    let mut ghe: Vec<(f64, Vec<f64>)> = config.q_set.iter().map(|&q| (q, Vec::new())).collect();
    let mut lo_v: Vec<(usize, Vec<f64>)> = config.tau_set.iter().map(|&t| (t, Vec::new())).collect();
    let mut lo_h = lo_v.clone();
    let (mut ghe_excluded, mut lo_excluded) = (0, 0);
    for rep in reps {
        match rep.ghe {
            Outcome::Done(hs) => {
                for (slot, h) in ghe.iter_mut().zip(hs) {
                    slot.1.push(h);
                }
            }
            Outcome::Failed => ghe_excluded += 1,
            Outcome::Skipped => {}
        }
        match rep.lo {
            Outcome::Done(stats) => {
                for ((v_slot, h_slot), (v, h)) in lo_v.iter_mut().zip(lo_h.iter_mut()).zip(stats) {
                    v_slot.1.push(v);
                    h_slot.1.push(h);
                }
            }
            Outcome::Failed => lo_excluded += 1,
            Outcome::Skipped => {}
        }
    }
    KEnsemble {
        k: params.k,
        params: *params,
        ghe,
        lo_v,
        lo_h,
        ghe_excluded,
        lo_excluded,
    }
}

/// Runs one ensemble per parameter set (one per cascade depth).
pub fn run_ensemble(params_per_k: &[MsmParams], config: &McConfig) -> Result<McEnsemble> {
    config.validate()?;
    for p in params_per_k {
        p.validate()?;
    }
    let per_k = params_per_k.iter().map(|p| run_one_k(p, config)).collect();
    Ok(McEnsemble {
        config: config.clone(),
        per_k,
    })
}

pub const MIN_COINCIDENCE_ENSEMBLE: usize = 40;

/// Whether `value` lies within the 2.5%..97.5% nearest-rank quantiles of `ensemble`.
pub fn quantile_coincidence(value: f64, ensemble: &[f64]) -> Result<bool> {
    if ensemble.len() < MIN_COINCIDENCE_ENSEMBLE {
        return Err(Error::SmallEnsemble {
            size: ensemble.len(),
            required: MIN_COINCIDENCE_ENSEMBLE,
        });
    }
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = stats::nearest_rank_quantile(&sorted, 0.025);
    let hi = stats::nearest_rank_quantile(&sorted, 0.975);
    Ok(value >= lo && value <= hi)
}

pub fn rejection_count(values: &[f64], interval: AcceptanceInterval) -> usize {
    values.iter().filter(|&&v| interval.rejects(v)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCount {
    pub k: usize,
    pub tau: usize,
    pub level: ConfidenceLevel,
    pub rejections: usize,
    pub n_reps: usize,
}

/// Rejection counts per `(k, tau, level)`; cells with no ensemble are omitted.
pub fn rejection_table(ensemble: &McEnsemble, tau_set: &[usize], levels: &[ConfidenceLevel]) -> Vec<RejectionCount> {
    let mut out = Vec::new();
    for e in &ensemble.per_k {
        for &tau in tau_set {
            let Some(values) = e.values(Statistic::LoV { tau }) else {
                continue;
            };
            for &level in levels {
                out.push(RejectionCount {
                    k: e.k,
                    tau,
                    level,
                    rejections: rejection_count(values, level.interval()),
                    n_reps: values.len(),
                });
            }
        }
    }
    out
}
