//! Run configuration: an optional TOML file merged with command-line flags.
//!
//! Flags always win over the file. The file path comes from `--config`, or
//! from the `MSM_CONFIG` environment variable when the flag is absent.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msm_core::monte_carlo::PAPER_LENGTH;
use msm_core::{Column, CsvFormat, GheMode, GmmConfig, McConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const CONFIG_ENV: &str = "MSM_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    /// Log differences of prices.
    #[default]
    Log,
    /// Plain differences of prices.
    Diff,
    /// The column already holds returns.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Integrated,
    Raw,
}

impl From<Mode> for GheMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Integrated => GheMode::Integrated,
            Mode::Raw => GheMode::Raw,
        }
    }
}

/// A single integer or an inclusive range `a-b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span(pub Vec<usize>);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
        match s.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(format!("empty range '{s}'"));
                }
                Ok(Span((a..=b).collect()))
            }
            None => Ok(Span(vec![parse(s)?])),
        }
    }
}

fn flatten(spans: &[Span]) -> Vec<usize> {
    spans.iter().flat_map(|s| s.0.iter().copied()).collect()
}

#[derive(Debug, Parser)]
#[command(name = "msm", version, about = "Markov-switching multifractal simulation, estimation and scaling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one MSM return path.
    Simulate(SimulateArgs),
    /// GMM estimates of (m0, sigma) for each cascade depth.
    Estimate(EstimateArgs),
    /// Generalized Hurst exponents and Lo's modified R/S for one series.
    Scaling(ScalingArgs),
    /// Fit per depth, simulate ensembles and compare scaling statistics.
    McCompare(McCompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Scaling(_) => "scaling",
            Command::McCompare(_) => "mc-compare",
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// TOML config file (default: $MSM_CONFIG).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct InputArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub transform: Option<InputTransform>,
    /// Value column, by header name or zero-based index.
    #[arg(long)]
    pub column: Option<String>,
    /// Date column by name or index; `none` if the file has no dates.
    #[arg(long)]
    pub date_column: Option<String>,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ScalingFlags {
    /// Moment orders for the generalized Hurst exponent.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Truncation lags for Lo's statistic (`0,5,10` or ranges such as `0-3`).
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<Span>>,
    /// Largest lags of the GHE regressions to average over (e.g. `5-19`).
    #[arg(long, value_delimiter = ',')]
    pub tau_max: Option<Vec<Span>>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub m0: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of returns to write.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Cascade depths, e.g. `5,10,15,20`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<Span>>,
    /// Fit the raw returns instead of returns scaled to unit variance.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scaling: ScalingFlags,
}

#[derive(Debug, Clone, Args)]
pub struct McCompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scaling: ScalingFlags,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<Span>>,
    /// Replications per depth for both GHE and Lo statistics.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub ghe_reps: Option<usize>,
    #[arg(long)]
    pub lo_reps: Option<usize>,
    /// Simulated path length (default: length of the input return series).
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub no_standardize: bool,
}

/// The `[scaling]` table of a config file, and its resolved form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSettings {
    pub q: Vec<f64>,
    pub tau: Vec<usize>,
    pub tau_max: Vec<usize>,
    pub mode: GheMode,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        let mc = McConfig::default();
        ScalingSettings {
            q: mc.q_set,
            tau: mc.tau_set,
            tau_max: mc.tau_max_set,
            mode: mc.ghe_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub ghe_reps: usize,
    pub lo_reps: usize,
    /// `None`: simulate paths as long as the input series.
    pub length: Option<usize>,
    pub burn_in: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        let mc = McConfig::default();
        McSettings {
            ghe_reps: mc.ghe_reps,
            lo_reps: mc.lo_reps,
            length: None,
            burn_in: mc.burn_in,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub m0: Option<f64>,
    pub sigma: f64,
    pub k: usize,
    pub length: usize,
    pub burn_in: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            m0: None,
            sigma: 1.0,
            k: 10,
            length: PAPER_LENGTH,
            burn_in: 0,
        }
    }
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub transform: Option<InputTransform>,
    pub standardize: Option<bool>,
    pub k: Option<Vec<usize>>,
    pub input: Option<CsvFormat>,
    pub scaling: ScalingSettings,
    pub monte_carlo: McSettings,
    pub gmm: GmmConfig,
    pub simulate: SimulateSettings,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub transform: InputTransform,
    pub standardize: bool,
    pub csv: CsvFormat,
    pub k_set: Vec<usize>,
    pub scaling: ScalingSettings,
    pub monte_carlo: McSettings,
    pub gmm: GmmConfig,
    pub simulate: SimulateSettings,
}

const DEFAULT_K_SET: [usize; 4] = [5, 10, 15, 20];

impl RunConfig {
    /// Reads the config file named by `--config` or `$MSM_CONFIG`, if any,
    /// and applies the flags on top.
    pub fn resolve(command: &Command) -> Result<Self, CliError> {
        let common = match command {
            Command::Simulate(a) => &a.common,
            Command::Estimate(a) => &a.common,
            Command::Scaling(a) => &a.common,
            Command::McCompare(a) => &a.common,
        };
        let path = common
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let file = match path {
            Some(p) => FileConfig::load(&p)?,
            None => FileConfig::default(),
        };
        Self::merge(command, file)
    }

    pub fn merge(command: &Command, file: FileConfig) -> Result<Self, CliError> {
        let mut cfg = RunConfig {
            command: command.name(),
            input: None,
            out: None,
            format: file.format.unwrap_or_default(),
            seed: file.seed.unwrap_or(McConfig::default().master_seed),
            transform: file.transform.unwrap_or_default(),
            standardize: file.standardize.unwrap_or(true),
            csv: file.input.unwrap_or_default(),
            k_set: file.k.unwrap_or_else(|| DEFAULT_K_SET.to_vec()),
            scaling: file.scaling,
            monte_carlo: file.monte_carlo,
            gmm: file.gmm,
            simulate: file.simulate,
        };
        match command {
            Command::Simulate(a) => {
                cfg.apply_common(&a.common);
                let s = &mut cfg.simulate;
                s.m0 = a.m0.or(s.m0);
                s.sigma = a.sigma.unwrap_or(s.sigma);
                s.k = a.k.unwrap_or(s.k);
                s.length = a.length.unwrap_or(s.length);
                s.burn_in = a.burn_in.unwrap_or(s.burn_in);
            }
            Command::Estimate(a) => {
                cfg.apply_common(&a.common);
                cfg.apply_input(&a.input);
                cfg.apply_k(a.k.as_deref());
                cfg.standardize &= !a.no_standardize;
            }
            Command::Scaling(a) => {
                cfg.apply_common(&a.common);
                cfg.apply_input(&a.input);
                cfg.apply_scaling(&a.scaling);
            }
            Command::McCompare(a) => {
                cfg.apply_common(&a.common);
                cfg.apply_input(&a.input);
                cfg.apply_scaling(&a.scaling);
                cfg.apply_k(a.k.as_deref());
                cfg.standardize &= !a.no_standardize;
                let mc = &mut cfg.monte_carlo;
                if let Some(n) = a.reps {
                    mc.ghe_reps = n;
                    mc.lo_reps = n;
                }
                mc.ghe_reps = a.ghe_reps.unwrap_or(mc.ghe_reps);
                mc.lo_reps = a.lo_reps.unwrap_or(mc.lo_reps);
                mc.length = a.length.or(mc.length);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_common(&mut self, a: &CommonArgs) {
        self.seed = a.seed.unwrap_or(self.seed);
        self.format = a.format.unwrap_or(self.format);
        self.out = a.out.clone();
    }

    fn apply_input(&mut self, a: &InputArgs) {
        self.input = a.input.clone();
        self.transform = a.transform.unwrap_or(self.transform);
        if let Some(c) = &a.column {
            self.csv.value_column = c.parse().expect("column parsing is infallible");
        }
        if let Some(c) = &a.date_column {
            self.csv.date_column = match c.as_str() {
                "none" => None,
                other => Some(other.parse::<Column>().expect("column parsing is infallible")),
            };
        }
        if a.no_header {
            self.csv.has_header = false;
        }
    }

    fn apply_scaling(&mut self, a: &ScalingFlags) {
        let s = &mut self.scaling;
        if let Some(q) = &a.q {
            s.q = q.clone();
        }
        if let Some(t) = &a.tau {
            s.tau = flatten(t);
        }
        if let Some(t) = &a.tau_max {
            s.tau_max = flatten(t);
        }
        if let Some(m) = a.mode {
            s.mode = m.into();
        }
    }

    fn apply_k(&mut self, k: Option<&[Span]>) {
        if let Some(k) = k {
            self.k_set = flatten(k);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        match self.command {
            "simulate" => {
                if self.simulate.m0.is_none() {
                    return bad("simulate needs --m0 (or `m0` under [simulate])");
                }
                if self.simulate.length == 0 {
                    return bad("--length must be positive");
                }
            }
            _ => {
                let Some(input) = &self.input else {
                    return bad("--input is required");
                };
                if !input.is_file() {
                    return Err(CliError::Io {
                        path: input.clone(),
                        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                    });
                }
            }
        }
        if matches!(self.command, "estimate" | "mc-compare") && self.k_set.is_empty() {
            return bad("the set of cascade depths is empty");
        }
        if self.k_set.contains(&0) {
            return bad("cascade depths must be at least 1");
        }
        if matches!(self.command, "scaling" | "mc-compare") {
            let s = &self.scaling;
            if s.q.is_empty() || s.tau_max.is_empty() {
                return bad("q and tau_max sets must not be empty");
            }
            if s.tau_max.iter().any(|&t| t < 3) {
                return bad("every tau_max must be at least 3");
            }
        }
        if self.command == "mc-compare" && (self.monte_carlo.ghe_reps == 0 || self.monte_carlo.lo_reps == 0) {
            return bad("the number of replications must be at least 1");
        }
        Ok(())
    }

    /// The settings that determine the numbers in the output, as JSON.
    /// Paths and the output format are left out.
    pub fn fingerprint(&self) -> Value {
        let input = json!({
            "transform": self.transform,
            "csv": self.csv,
        });
        match self.command {
            "simulate" => json!({
                "command": self.command,
                "seed": self.seed,
                "simulate": self.simulate,
                "gamma_k": self.gmm.gamma_k,
                "b": self.gmm.b,
            }),
            "estimate" => json!({
                "command": self.command,
                "input": input,
                "standardize": self.standardize,
                "k": self.k_set,
                "gmm": self.gmm,
            }),
            "scaling" => json!({
                "command": self.command,
                "input": input,
                "scaling": self.scaling,
            }),
            _ => json!({
                "command": self.command,
                "seed": self.seed,
                "input": input,
                "standardize": self.standardize,
                "k": self.k_set,
                "scaling": self.scaling,
                "monte_carlo": self.monte_carlo,
                "gmm": self.gmm,
            }),
        }
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::fingerprint`].
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.fingerprint().to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Comment-line header attached to every table.
    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ("command".into(), self.command.into()),
            ("seed".into(), self.seed.to_string()),
            ("config_hash".into(), self.config_hash()),
        ]
    }
}
