use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("zero vector cannot be normalized ({0})")]
    ZeroVector(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operator is not a valid {kind}: {reason}")]
    InvalidOperator { kind: &'static str, reason: String },
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("trace drift {drift:.3e} exceeds {limit:.1e}; reduce dt_max")]
    TraceDrift { drift: f64, limit: f64 },
    #[error("event index {index} out of range for {len} events")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("branch count {count} exceeds cap {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that indicate numerically invalid input or integration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eigensolver(_) | Error::TraceDrift { .. } | Error::InvalidOperator { .. }
        )
    }
}
