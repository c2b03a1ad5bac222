//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument left its mathematical domain (e.g. probabilities outside the unit interval).
    #[error("{name}={value} outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A degree distribution violated its construction invariants.
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    /// Mismatched vector/operator dimensions.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A quantity that must be positive for the requested analysis is not.
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// The requested construction cannot be realized.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Invalid configuration value.
    #[error("invalid config: field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Error::Domain {
            name,
            value,
            lo,
            hi,
        }
    }
}
