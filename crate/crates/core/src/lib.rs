//! Markov-switching multifractal (MSM) volatility model: path simulation,
//! GMM estimation of `(m0, sigma)`, generalized Hurst exponents, Lo's
//! modified R/S analysis and a Monte Carlo harness that compares scaling
//! exponents of observed series with those of fitted MSM ensembles.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gmm;
pub mod hac;
pub mod model;
pub mod moments;
pub mod monte_carlo;
pub mod optimize;
pub mod scaling;
pub mod stats;
pub mod tables;

pub use data::{load_csv, standardize, to_returns, Column, CsvFormat, LoadedSeries, PriceSeries};
pub use error::{Error, ErrorKind, Result};
pub use gmm::{gmm_estimate, GmmConfig, GmmResult};
pub use model::{
    init_state, simulate, simulate_with, transition_probabilities, MsmParams, MsmState, ReturnSeries, Transform,
};
pub use moments::{analytic_moments, empirical_moments, MomentKind, MomentVector, LOG_ABS_NORMAL};
pub use monte_carlo::{
    quantile_coincidence, rejection_table, run_ensemble, McConfig, McEnsemble, McSummary, Statistic,
};
pub use scaling::{
    ghe, ghe_averaged, lo_statistic, rs_significance, scaling_report, structure_function, ConfidenceLevel,
    GheMode, GheResult, LoResult, ScalingReport,
};
