//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("placement infeasible after {placed} of {requested} sensors: {reason}")]
    Infeasible {
        placed: usize,
        requested: usize,
        reason: String,
    },

    #[error("under-determined estimation: {sensors} sensors < {modes} modes")]
    UnderDetermined { sensors: usize, modes: usize },

    #[error("ill-conditioned sensor selection {indices:?}: condition estimate {condition:.3e}")]
    IllConditioned { indices: Vec<usize>, condition: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
