use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported precision: {0} mantissa bits (supported: 53, 64, 128, 256, 512, 1024)")]
    UnsupportedPrecision(u32),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gset line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is too far from positive semidefinite: min eigenvalue {min_eigenvalue:e}, max eigenvalue {max_eigenvalue:e}")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("instance too large: n = {n} exceeds limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("step failure: {0}")]
    StepFailure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
