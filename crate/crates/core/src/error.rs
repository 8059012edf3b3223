use ris_conic::ConicError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("covariance is not positive definite ({0})")]
    SingularCovariance(String),
    #[error("quadratic form is not positive definite: minimum eigenvalue {min_eigenvalue:e}, trace {trace:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, trace: f64 },
    #[error("model has no line-of-sight channels")]
    MissingLos,
    #[error("active channel is rank deficient: singular values {sigma_min:e} / {sigma_max:e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("numerical trouble: {0}")]
    NumericalTrouble(String),
    #[error(transparent)]
    Solver(#[from] ConicError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
