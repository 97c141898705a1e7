use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into two families: domain errors (bad parameters, numerical
/// breakdown) and IO errors. The CLI maps the former to exit code 1 and the
/// latter to exit code 2 via [`Error::is_io`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("photon-number cap n_max={n_max} exceeded; overflow weight {weight:.3e}")]
    TruncationOverflow { n_max: u32, weight: f64 },

    #[error("time bin {0} is not among the retained output bins")]
    UnknownBin(i64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state has zero norm")]
    ZeroState,

    #[error("grid step {step} ns is coarser than irf_fwhm/10 = {limit} ns")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("curve sampling is not uniform")]
    NonUniformGrid,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram baseline must be positive, got {0}")]
    ZeroBaseline(f64),

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("fit Jacobian is degenerate (condition estimate {condition:.3e})")]
    DegenerateJacobian { condition: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
