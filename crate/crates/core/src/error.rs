use thiserror::Error;

/// Errors raised by the simulation and reconstruction routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GiError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate ensemble: {0}")]
    Degenerate(String),

    #[error("landweber iteration diverged at iteration {iteration} (residual {residual:e})")]
    Divergence { iteration: usize, residual: f64 },

    #[error("problem too large: {pixels} pixels exceeds limit {limit}")]
    TooLarge { pixels: usize, limit: usize },

    #[error("normal matrix is singular beyond the ridge tolerance")]
    Singular,

    #[error("index out of range: ({x}, {y}) on a {n}x{n} grid")]
    OutOfRange { x: usize, y: usize, n: usize },
}

impl GiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GiError::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, GiError>;
