//! Result tables in long format, written as CSV (with `#` metadata lines)
//! or JSON (with a `metadata` object).
//!
//! Column layouts are documented in `docs/FORMATS.md`.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::gmm::GmmResult;
use crate::monte_carlo::{quantile_coincidence, McEnsemble, McSummary, Statistic};
use crate::scaling::ScalingReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if !x.is_finite() => Value::Null,
            Cell::Empty => Value::Null,
            other => serde_json::to_value(other).expect("cells always serialize"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> std::io::Result<()> {
        writeln!(out, "# table: {}", self.name)?;
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self, metadata: &[(String, String)]) -> Value {
        let meta: Map<String, Value> = metadata
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), v.json()))
                        .collect(),
                )
            })
            .collect();
        json!({ "table": self.name, "metadata": meta, "rows": rows })
    }
}

/// GMM estimates, one row per cascade depth.
pub fn gmm_table(label: &str, results: &[GmmResult]) -> Table {
    let mut t = Table::new(
        "gmm_estimates",
        &[
            "series", "k", "m0_hat", "se_m0", "sigma_hat", "se_sigma", "j_statistic", "converged", "at_boundary",
        ],
    );
    for r in results {
        t.push(vec![
            label.into(),
            r.k.into(),
            r.m0_hat.into(),
            r.se_m0.into(),
            r.sigma_hat.into(),
            r.se_sigma.into(),
            r.j_statistic.into(),
            r.converged.into(),
            r.at_boundary.into(),
        ]);
    }
    t
}

fn summary_cells(s: &McSummary) -> Vec<Cell> {
    vec![
        s.k.into(),
        s.mean.into(),
        s.std.into(),
        s.quantile_2_5.into(),
        s.quantile_97_5.into(),
        s.n_reps.into(),
        s.excluded.into(),
    ]
}

const SUMMARY_COLUMNS: [&str; 7] = ["k", "sim_mean", "sim_std", "sim_q2_5", "sim_q97_5", "n_reps", "excluded"];

fn comparison_table<F>(name: &str, key: &str, keys: &[Cell], stats: &[Statistic], empirical: F, ens: &McEnsemble) -> Table
where
    F: Fn(Statistic) -> Option<(f64, Option<f64>)>,
{
    let mut columns = vec!["series", key, "empirical", "empirical_std"];
    columns.extend(SUMMARY_COLUMNS);
    columns.push("coincide");
    let mut t = Table::new(name, &columns);
    for (key_cell, &stat) in keys.iter().zip(stats) {
        let emp = empirical(stat);
        for e in &ens.per_k {
            let (Some(summary), Some(values)) = (e.summary(stat), e.values(stat)) else {
                continue;
            };
            let coincide = emp.and_then(|(v, _)| quantile_coincidence(v, values).ok());
            let mut row = vec![
                Cell::Empty,
                key_cell.clone(),
                emp.map(|(v, _)| v).into(),
                emp.and_then(|(_, s)| s).into(),
            ];
            row.extend(summary_cells(&summary));
            row.push(coincide.into());
            t.push(row);
        }
    }
    t
}

fn with_label(mut t: Table, label: &str) -> Table {
    for row in &mut t.rows {
        row[0] = label.into();
    }
    t
}

/// Generalized Hurst exponents: empirical value vs ensemble, per `(q, k)`.
pub fn ghe_comparison(label: &str, empirical: Option<&ScalingReport>, ens: &McEnsemble) -> Table {
    let stats: Vec<Statistic> = ens.config.q_set.iter().map(|&q| Statistic::Ghe { q }).collect();
    let keys: Vec<Cell> = ens.config.q_set.iter().map(|&q| Cell::Num(q)).collect();
    let t = comparison_table(
        "ghe_comparison",
        "q",
        &keys,
        &stats,
        |s| match s {
            Statistic::Ghe { q } => empirical?.ghe_for(q).map(|g| (g.h, Some(g.h_std))),
            _ => None,
        },
        ens,
    );
    with_label(t, label)
}

/// Lo's `V_T`: empirical value vs ensemble, per `(tau, k)`.
pub fn lo_v_comparison(label: &str, empirical: Option<&ScalingReport>, ens: &McEnsemble) -> Table {
    let stats: Vec<Statistic> = ens.config.tau_set.iter().map(|&tau| Statistic::LoV { tau }).collect();
    let keys: Vec<Cell> = ens.config.tau_set.iter().map(|&t| Cell::from(t)).collect();
    let t = comparison_table(
        "lo_v_comparison",
        "tau",
        &keys,
        &stats,
        |s| match s {
            Statistic::LoV { tau } => empirical?.lo_for(tau).map(|l| (l.v_stat, None)),
            _ => None,
        },
        ens,
    );
    with_label(t, label)
}

/// Lo's Hurst exponent `ln Q / ln T`: empirical value vs ensemble.
pub fn lo_h_comparison(label: &str, empirical: Option<&ScalingReport>, ens: &McEnsemble) -> Table {
    let stats: Vec<Statistic> = ens.config.tau_set.iter().map(|&tau| Statistic::LoH { tau }).collect();
    let keys: Vec<Cell> = ens.config.tau_set.iter().map(|&t| Cell::from(t)).collect();
    let t = comparison_table(
        "lo_h_comparison",
        "tau",
        &keys,
        &stats,
        |s| match s {
            Statistic::LoH { tau } => empirical?.lo_for(tau).map(|l| (l.h, None)),
            _ => None,
        },
        ens,
    );
    with_label(t, label)
}

/// Rejections of the short-memory null per `(tau, k)` at 95% and 99%.
pub fn rejection_counts_table(ens: &McEnsemble) -> Table {
    let mut t = Table::new("lo_rejections", &["tau", "k", "reject_95", "reject_99", "n_reps"]);
    for &tau in &ens.config.tau_set {
        for e in &ens.per_k {
            if let Some(s) = e.summary(Statistic::LoV { tau }) {
                t.push(vec![
                    tau.into(),
                    e.k.into(),
                    s.reject_95.into(),
                    s.reject_99.into(),
                    s.n_reps.into(),
                ]);
            }
        }
    }
    t
}

/// Scaling statistics of a single series: one row per GHE order, then one per lag.
pub fn scaling_table(report: &ScalingReport) -> Table {
    let mut t = Table::new(
        "scaling",
        &["series", "statistic", "q", "tau", "value", "dispersion", "v_stat", "reject_95", "reject_99"],
    );
    for g in &report.ghe {
        t.push(vec![
            report.label.as_str().into(),
            "ghe".into(),
            g.q.into(),
            Cell::Empty,
            g.h.into(),
            g.h_std.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    for l in &report.lo {
        t.push(vec![
            report.label.as_str().into(),
            "lo".into(),
            Cell::Empty,
            l.tau.into(),
            l.h.into(),
            Cell::Empty,
            l.v_stat.into(),
            l.reject_95.into(),
            l.reject_99.into(),
        ]);
    }
    t
}
