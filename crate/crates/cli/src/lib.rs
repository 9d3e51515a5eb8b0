//! Library side of the `msm` command-line tool.
//!
//! Each subcommand is a `cmd_*` function that turns a resolved
//! [`RunConfig`] into output (tables, or a simulated series); [`run`] wires
//! them to files or stdout.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O or
//! parse failure, 4 numerical failure (degenerate input, singular matrices).

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use msm_core::tables::{
    ghe_comparison, gmm_table, lo_h_comparison, lo_v_comparison, rejection_counts_table, scaling_table, Table,
};
use msm_core::{
    gmm_estimate, load_csv, run_ensemble, scaling_report, simulate, standardize, to_returns, ErrorKind, McConfig,
    MsmParams, ReturnSeries, Transform,
};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use config::{Cli, Command, FileConfig, InputTransform, OutputFormat, RunConfig, CONFIG_ENV};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] msm_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("failed writing output: {0}")]
    Write(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Write(_) => EXIT_IO,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Loads `--input` and converts it to returns, optionally scaled to unit variance.
fn load_returns(cfg: &RunConfig, scale: bool) -> Result<ReturnSeries> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::Config("--input is required".into()))?;
    let loaded = load_csv(path, &cfg.csv)?;
    if loaded.skipped_rows > 0 {
        log::warn!("{}: skipped {} rows without a usable value", path.display(), loaded.skipped_rows);
    }
    let p = loaded.series;
    let r = match cfg.transform {
        InputTransform::Log => to_returns(&p, Transform::LogDiff)?,
        InputTransform::Diff => to_returns(&p, Transform::Diff)?,
        InputTransform::None => ReturnSeries::new(p.values().to_vec(), Transform::Raw, p.label.clone())?,
    };
    Ok(if scale { standardize(&r)? } else { r })
}

fn simulation_params(cfg: &RunConfig) -> Result<MsmParams> {
    let s = &cfg.simulate;
    let m0 = s.m0.ok_or_else(|| CliError::Config("m0 is required".into()))?;
    Ok(MsmParams::with_transition(m0, s.sigma, s.k, cfg.gmm.gamma_k, cfg.gmm.b)?)
}

/// One simulated return path.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<ReturnSeries> {
    let params = simulation_params(cfg)?;
    let mut r = simulate(&params, cfg.simulate.length, cfg.seed, cfg.simulate.burn_in)?;
    r.label = format!("msm_k{}", params.k);
    Ok(r)
}

/// GMM estimates, one row per cascade depth.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Vec<Table>> {
    let r = load_returns(cfg, cfg.standardize)?;
    let results = cfg
        .k_set
        .iter()
        .map(|&k| gmm_estimate(&r, k, &cfg.gmm))
        .collect::<msm_core::Result<Vec<_>>>()?;
    for res in results.iter().filter(|res| !res.converged) {
        log::warn!("GMM for k = {} did not converge", res.k);
    }
    Ok(vec![gmm_table(&r.label, &results)])
}

/// Generalized Hurst exponents and Lo's statistics of the input series.
pub fn cmd_scaling(cfg: &RunConfig) -> Result<Vec<Table>> {
    let r = load_returns(cfg, false)?;
    let s = &cfg.scaling;
    let report = scaling_report(&r, &s.q, &s.tau_max, s.mode, &s.tau)?;
    Ok(vec![scaling_table(&report)])
}

/// Fits the model for each depth, simulates one ensemble per fit and
/// compares the input's scaling statistics with the ensemble distributions.
///
/// Tables, in order: GMM estimates, empirical scaling, GHE comparison,
/// Lo `V_T` comparison, simulated rejection counts, Lo Hurst comparison.
pub fn cmd_mc_compare(cfg: &RunConfig) -> Result<Vec<Table>> {
    let r = load_returns(cfg, cfg.standardize)?;
    let s = &cfg.scaling;
    let mc = McConfig {
        ghe_reps: cfg.monte_carlo.ghe_reps,
        lo_reps: cfg.monte_carlo.lo_reps,
        length: cfg.monte_carlo.length.unwrap_or(r.len()),
        burn_in: cfg.monte_carlo.burn_in,
        k_set: cfg.k_set.clone(),
        tau_set: s.tau.clone(),
        q_set: s.q.clone(),
        tau_max_set: s.tau_max.clone(),
        ghe_mode: s.mode,
        master_seed: cfg.seed,
    };
    // Fail on bad ensemble settings before spending time on the fits.
    mc.validate()?;
    let report = scaling_report(&r, &s.q, &s.tau_max, s.mode, &s.tau)?;

    let fits = cfg
        .k_set
        .iter()
        .map(|&k| gmm_estimate(&r, k, &cfg.gmm))
        .collect::<msm_core::Result<Vec<_>>>()?;
    for f in fits.iter().filter(|f| !f.converged) {
        log::warn!("GMM for k = {} did not converge; simulating from its last iterate", f.k);
    }
    let params = fits
        .iter()
        .map(|f| f.params(&cfg.gmm))
        .collect::<msm_core::Result<Vec<_>>>()?;
    let ens = run_ensemble(&params, &mc)?;
    if ens.total_excluded() > 0 {
        log::warn!("{} replications were excluded as degenerate", ens.total_excluded());
    }

    Ok(vec![
        gmm_table(&r.label, &fits),
        scaling_table(&report),
        ghe_comparison(&r.label, Some(&report), &ens),
        lo_v_comparison(&r.label, Some(&report), &ens),
        rejection_counts_table(&ens),
        lo_h_comparison(&r.label, Some(&report), &ens),
    ])
}

/// Writes tables as CSV blocks separated by a blank line, or as a JSON array.
pub fn write_tables<W: Write>(mut out: W, tables: &[Table], meta: &[(String, String)], format: OutputFormat) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                t.write_csv(&mut out, meta)?;
            }
        }
        OutputFormat::Json => {
            let v = Value::Array(tables.iter().map(|t| t.to_json(meta)).collect());
            serde_json::to_writer_pretty(&mut out, &v)?;
            writeln!(out)?;
        }
    }
    out.flush()
}

pub fn write_series<W: Write>(mut out: W, r: &ReturnSeries, meta: &[(String, String)], format: OutputFormat) -> io::Result<()> {
    match format {
        OutputFormat::Csv => msm_core::data::write_returns_csv(&mut out, r, meta)?,
        OutputFormat::Json => {
            let m: Map<String, Value> = meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
            let v = json!({ "series": r.label, "metadata": m, "returns": r.values() });
            serde_json::to_writer_pretty(&mut out, &v)?;
            writeln!(out)?;
        }
    }
    out.flush()
}

fn open_output(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Resolves the configuration, runs the subcommand and writes its output.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.command)?;
    let meta = cfg.metadata();
    // Compute before opening the output so a failed run leaves no partial file.
    match cfg.command {
        "simulate" => {
            let r = cmd_simulate(&cfg)?;
            write_series(open_output(&cfg)?, &r, &meta, cfg.format)?;
        }
        cmd => {
            let tables = match cmd {
                "estimate" => cmd_estimate(&cfg)?,
                "scaling" => cmd_scaling(&cfg)?,
                _ => cmd_mc_compare(&cfg)?,
            };
            write_tables(open_output(&cfg)?, &tables, &meta, cfg.format)?;
        }
    }
    Ok(())
}
