use thiserror::Error;

use crate::deriv::Verdict;
use crate::path::GridPath;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("missing derivative component: {0}")]
    MissingDerivative(String),

    #[error("partition does not fit the path grid: {0}")]
    GridMismatch(String),

    #[error(
        "Picard iteration did not converge in window starting at t={window_start} \
         after {iterations} iterations (last sup-change {last_change:e})"
    )]
    PicardNonConvergence {
        window_start: f64,
        iterations: usize,
        last_change: f64,
        last_iterate: Box<GridPath>,
    },

    #[error("{which} is not differentiable here (verdict: {verdict})")]
    NonDifferentiable { which: String, verdict: Verdict },

    #[error("direction matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::PicardNonConvergence { .. }
            | Error::NonDifferentiable { .. }
            | Error::IllConditioned { .. } => ErrorCategory::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
