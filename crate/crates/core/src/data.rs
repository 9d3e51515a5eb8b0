//! Loading price series from CSV and turning them into return series.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ReturnSeries, Transform};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub dates: Option<Vec<NaiveDate>>,
    values: Vec<f64>,
    pub label: String,
}

impl PriceSeries {
    pub fn new(values: Vec<f64>, dates: Option<Vec<NaiveDate>>, label: impl Into<String>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::domain(format!(
                "price series needs at least 3 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("price series contains non-finite values"));
        }
        if let Some(d) = &dates {
            if d.len() != values.len() {
                return Err(Error::domain("dates and values differ in length"));
            }
            if d.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain("dates must be strictly increasing"));
            }
        }
        Ok(PriceSeries {
            dates,
            values,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Column selector: zero-based index or header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse::<usize>().map_or_else(|_| Column::Name(s.to_string()), Column::Index))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvFormat {
    pub value_column: Column,
    /// ISO-8601 date column, if any.
    pub date_column: Option<Column>,
    pub has_header: bool,
    pub delimiter: char,
}

impl Default for CsvFormat {
    /// `date,price` with a header row.
    fn default() -> Self {
        CsvFormat {
            value_column: Column::Index(1),
            date_column: Some(Column::Index(0)),
            has_header: true,
            delimiter: ',',
        }
    }
}

impl CsvFormat {
    /// Headerless file holding one number per line.
    pub fn single_column() -> Self {
        CsvFormat {
            value_column: Column::Index(0),
            date_column: None,
            has_header: false,
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub series: PriceSeries,
    /// Rows skipped because they were blank or held a missing/non-numeric value.
    pub skipped_rows: usize,
}

fn resolve(col: &Column, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match col {
        Column::Index(i) => Ok(*i),
        Column::Name(name) => headers
            .and_then(|h| h.iter().position(|f| f.trim() == name))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("column '{name}' not found in header"),
            }),
    }
}

/// Reads one numeric column (and optionally a date column) from a CSV file.
/// Lines starting with `#` are comments.
pub fn load_csv(path: &Path, format: &CsvFormat) -> Result<LoadedSeries> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let blank_lines = text.lines().filter(|l| l.trim().is_empty()).count();
    let delimiter = u8::try_from(format.delimiter).map_err(|_| Error::domain("delimiter must be ASCII"))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(format.has_header)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = if format.has_header {
        Some(reader.headers().map_err(|e| csv_error(&e))?.clone())
    } else {
        None
    };
    let value_idx = resolve(&format.value_column, headers.as_ref())?;
    let date_idx = format
        .date_column
        .as_ref()
        .map(|c| resolve(c, headers.as_ref()))
        .transpose()?;

    let mut values = Vec::new();
    let mut dates = Vec::new();
    let mut skipped = blank_lines;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let value = record
            .get(value_idx)
            .filter(|s| !s.is_empty())
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite());
        let Some(value) = value else {
            skipped += 1;
            continue;
        };
        if let Some(di) = date_idx {
            let raw = record.get(di).unwrap_or("");
            let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| Error::Parse {
                line,
                message: format!("invalid date '{raw}': {e}"),
            })?;
            dates.push(date);
        }
        values.push(value);
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} blank or non-numeric rows", path.display());
    }
    if values.is_empty() {
        return Err(Error::EmptySeries(path.to_path_buf()));
    }
    let label = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let series = PriceSeries::new(values, date_idx.map(|_| dates), label)?;
    Ok(LoadedSeries {
        series,
        skipped_rows: skipped,
    })
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Log differences or plain differences of consecutive prices.
pub fn to_returns(p: &PriceSeries, transform: Transform) -> Result<ReturnSeries> {
    let v = p.values();
    let values: Vec<f64> = match transform {
        Transform::LogDiff => {
            if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::domain(format!(
                    "log returns need positive prices, found {} at index {i}",
                    v[i]
                )));
            }
            v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect()
        }
        Transform::Diff => v.windows(2).map(|w| w[1] - w[0]).collect(),
        Transform::Raw => return Err(Error::domain("raw is not a price transform")),
    };
    ReturnSeries::new(values, transform, p.label.clone())
}

/// Divides by the population standard deviation (returns are not demeaned).
pub fn standardize(r: &ReturnSeries) -> Result<ReturnSeries> {
    let sd = stats::population_std(r.values());
    let scale = r.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // Rounding leaves a residual spread of order 1e-17 on constant input.
    if !(sd > 1e-12 * scale) {
        return Err(Error::degenerate("cannot standardize a series with zero variance"));
    }
    if r.standardized && (sd - 1.0).abs() < 1e-12 {
        return Ok(r.clone());
    }
    let values = r.values().iter().map(|v| v / sd).collect();
    Ok(r.with_values_unchecked(values, true))
}

/// Writes a return series as a single `return` column, preceded by `#`
/// comment lines for each entry of `metadata`.
pub fn write_returns_csv<W: Write>(mut out: W, r: &ReturnSeries, metadata: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "return")?;
    for v in r.values() {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_dated_prices() {
        let f = write_tmp("date,price\n2004-01-02,100.5\n2004-01-05,101.0\n2004-01-06,99.75\n");
        let l = load_csv(f.path(), &CsvFormat::default()).unwrap();
        assert_eq!(l.series.values(), &[100.5, 101.0, 99.75]);
        assert_eq!(l.series.dates.as_ref().unwrap()[1], NaiveDate::from_ymd_opt(2004, 1, 5).unwrap());
        assert_eq!(l.skipped_rows, 0);
    }

    #[test]
    fn blank_row_is_skipped_and_counted() {
        let f = write_tmp("date,price\n2004-01-02,1.0\n\n2004-01-05,2.0\n2004-01-06,3.0\n");
        let l = load_csv(f.path(), &CsvFormat::default()).unwrap();
        assert_eq!(l.series.len(), 3);
        assert_eq!(l.skipped_rows, 1);
    }

    #[test]
    fn missing_values_are_skipped() {
        let f = write_tmp("date,price\n2004-01-02,1.0\n2004-01-03,\n2004-01-04,n/a\n2004-01-05,2.0\n2004-01-06,3.0\n");
        let l = load_csv(f.path(), &CsvFormat::default()).unwrap();
        assert_eq!(l.series.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(l.skipped_rows, 2);
    }

    #[test]
    fn headerless_single_column() {
        let f = write_tmp("5.0\n5.25\n5.5\n5.0\n");
        let l = load_csv(f.path(), &CsvFormat::single_column()).unwrap();
        assert!(l.series.dates.is_none());
        assert_eq!(l.series.values(), &[5.0, 5.25, 5.5, 5.0]);
    }

    #[test]
    fn named_columns_and_semicolons() {
        let f = write_tmp("day;close;volume\n2001-03-01;10;5\n2001-03-02;11;6\n2001-03-05;12;7\n");
        let fmt = CsvFormat {
            value_column: Column::Name("close".into()),
            date_column: Some(Column::Name("day".into())),
            has_header: true,
            delimiter: ';',
        };
        let l = load_csv(f.path(), &fmt).unwrap();
        assert_eq!(l.series.values(), &[10.0, 11.0, 12.0]);
    }

    #[test]
    fn load_errors() {
        let missing = load_csv(Path::new("/nonexistent/prices.csv"), &CsvFormat::default());
        assert!(matches!(missing, Err(Error::Io { .. })));

        let f = write_tmp("date,price\nxx,\n");
        assert!(matches!(load_csv(f.path(), &CsvFormat::default()), Err(Error::EmptySeries(_))));

        let f = write_tmp("date,price\n2004-01-02,1\n2004-13-45,2\n2004-01-06,3\n");
        match load_csv(f.path(), &CsvFormat::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let f = write_tmp("date,price\n2004-01-02,1\n");
        let fmt = CsvFormat {
            value_column: Column::Name("close".into()),
            ..CsvFormat::default()
        };
        assert!(matches!(load_csv(f.path(), &fmt), Err(Error::Parse { .. })));
    }

    #[test]
    fn log_and_plain_differences() {
        let e = std::f64::consts::E;
        let p = PriceSeries::new(vec![1.0, e, e], None, "p").unwrap();
        let r = to_returns(&p, Transform::LogDiff).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.values()[1], 0.0);
        assert_eq!(r.transform, Transform::LogDiff);

        let rates = PriceSeries::new(vec![5.0, 5.25, 5.25], None, "tb").unwrap();
        assert_eq!(to_returns(&rates, Transform::Diff).unwrap().values(), &[0.25, 0.0]);

        let bad = PriceSeries::new(vec![1.0, -1.0, 2.0], None, "x").unwrap();
        assert!(matches!(to_returns(&bad, Transform::LogDiff), Err(Error::Domain(_))));
    }

    #[test]
    fn price_series_invariants() {
        assert!(PriceSeries::new(vec![1.0, 2.0], None, "x").is_err());
        let d = |day| NaiveDate::from_ymd_opt(2000, 1, day).unwrap();
        assert!(PriceSeries::new(vec![1.0, 2.0, 3.0], Some(vec![d(1), d(1), d(2)]), "x").is_err());
    }

    #[test]
    fn standardize_examples() {
        let r = ReturnSeries::new(vec![1.0, -1.0], Transform::Raw, "x").unwrap();
        let s = standardize(&r).unwrap();
        assert_eq!(s.values(), &[1.0, -1.0]);
        assert!(s.standardized);

        let c = ReturnSeries::new(vec![0.3; 10], Transform::Raw, "c").unwrap();
        assert!(matches!(standardize(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn returns_csv_round_trip() {
        let r = ReturnSeries::new(vec![0.125, -2.5e-3, 1e-9], Transform::Raw, "x").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_returns_csv(f.as_file(), &r, &[("seed".into(), "7".into())]).unwrap();
        let fmt = CsvFormat {
            value_column: Column::Name("return".into()),
            date_column: None,
            has_header: true,
            delimiter: ',',
        };
        // `#` lines precede the header, so the header must still be found.
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.starts_with("# seed: 7\nreturn\n"));
        let l = load_csv(f.path(), &fmt).unwrap();
        assert_eq!(l.series.values(), r.values());
    }
}
