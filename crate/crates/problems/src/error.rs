use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("inconsistent initial data: {what} (residual {residual:e})")]
    Consistency { what: &'static str, residual: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Core(#[from] cgmres_core::Error),
}

pub type Result<T> = std::result::Result<T, ProblemError>;
