use std::path::PathBuf;

/// Errors produced by index construction, search, generation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric parameter was outside its documented domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A query or point had a different dimension than the indexed set.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `k` was zero or larger than the number of indexed points.
    #[error("invalid k = {k} for a set of {n} points")]
    InvalidK { k: usize, n: usize },

    /// An operation that needs at least one point was given an empty set.
    #[error("operation requires a non-empty point set")]
    EmptyPointSet,

    /// A closed-form expression left its valid numeric range
    /// (degenerate denominator, non-finite intermediate, ...).
    #[error("numeric evaluation failed: {0}")]
    Numeric(String),

    /// Rejection sampling exhausted its attempt budget; the requested
    /// dataset is infeasible for the given geometry.
    #[error("dataset generation infeasible: {0}")]
    GenerationInfeasible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A dataset file did not conform to the binary or sidecar format.
    /// `offset` is the byte position at which decoding failed.
    #[error("malformed dataset file {path} at byte {offset}: {reason}")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
