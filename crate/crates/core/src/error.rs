use thiserror::Error;

/// Errors raised by simulation, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst parameter {0} outside (1/3, 1)")]
    InvalidHurst(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Cholesky fallback needs {n_steps} steps, above the configured cap of {cap}")]
    CholeskyCapExceeded { n_steps: usize, cap: usize },

    #[error("increment covariance is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("non-finite state at step {step} (last finite value {last})")]
    NonFiniteState { step: usize, last: f64 },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("degenerate cohort: drift energy D_N is zero")]
    DegenerateCohort,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
