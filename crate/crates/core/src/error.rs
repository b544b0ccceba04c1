use std::path::PathBuf;

use crate::geometry::Vector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "inner solver stopped after {iterations} iterations with certificate {certificate:e} \
         (tolerance {tolerance:e})"
    )]
    InnerSolver {
        iterations: usize,
        certificate: f64,
        tolerance: f64,
        best: Vector,
    },

    #[error("iteration diverged at k = {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("oracle rejected instance: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
