use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// A parameter or input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input is well-formed but carries no usable information
    /// (zero variance, all-zero series, too few observations).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("series is empty after loading {0}")]
    EmptySeries(PathBuf),

    #[error("ensemble of size {size} is too small (need at least {required})")]
    SmallEnsemble { size: usize, required: usize },

    #[error("unsupported confidence level {0} (supported: 0.95, 0.99)")]
    UnsupportedLevel(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::EmptySeries(_) => ErrorKind::Io,
            Error::Degenerate(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Domain(_) | Error::SmallEnsemble { .. } | Error::UnsupportedLevel(_) => {
                ErrorKind::Validation
            }
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
