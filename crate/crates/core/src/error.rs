use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Structural or numerical singularity during factorization. The driver
    /// treats this as a request to increase the homotopy parameter.
    #[error("singular matrix at column {index}; increase lambda")]
    Singular { index: usize },

    #[error("point violates box constraint in component {index} by {violation:e}")]
    OutsideBox { index: usize, violation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("inner solver failed: {0}")]
    InnerSolve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;
