use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection onto intersection did not converge in {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("moment prior construction failed: {0}")]
    PriorConstruction(String),

    #[error("invalid bracket [{lo}, {hi}]: total error {err_lo} at lo and {err_hi} at hi do not straddle eta = {eta}")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        err_lo: f64,
        err_hi: f64,
        eta: f64,
    },

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionBudget { attempts: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("evaluator returned a non-finite value at {point:?}")]
    Evaluator { point: Vec<f64> },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
