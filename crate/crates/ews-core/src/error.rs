use thiserror::Error;

/// Errors produced by panel preparation, model fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter was outside its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Input series or matrices with inconsistent lengths.
    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    /// A non-finite value where a finite one is required.
    #[error("non-finite value at position {position} ({context})")]
    NonFinite {
        position: usize,
        context: &'static str,
    },

    /// The data does not contain both classes, or a class is too small
    /// for the requested estimator.
    #[error("degenerate class composition: {0}")]
    DegenerateClasses(String),

    /// Empty input where at least one observation is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Malformed panel data (unknown country, duplicate quarter, ...).
    #[error("panel error: {0}")]
    Panel(String),

    /// CSV parsing or serialization failure.
    #[error("csv error: {0}")]
    Csv(String),

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Generation of a synthetic panel was asked for an infeasible shape.
    #[error("infeasible synthetic panel: {0}")]
    Infeasible(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
