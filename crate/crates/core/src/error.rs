use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension {dim} exceeds the supported maximum of {max}")]
    UnsupportedSize { dim: usize, max: usize },

    /// Root finder ran out of sweeps; carries the best iterate so callers can
    /// still inspect it.
    #[error("no convergence after {sweeps} sweeps (max residual {max_residual:e})")]
    NonConvergence {
        sweeps: usize,
        best: Vec<Complex64>,
        residuals: Vec<f64>,
        max_residual: f64,
    },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("no return time found within budget {budget}")]
    BudgetExhausted { budget: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
