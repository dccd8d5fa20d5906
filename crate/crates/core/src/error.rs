use thiserror::Error;

/// Errors raised by the linear algebra and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("least-squares matrix is rank deficient (|r_jj| = {diag:e} at column {column})")]
    RankDeficient { column: usize, diag: f64 },

    #[error("preconditioner produced a non-finite value at iteration {iteration}")]
    PreconditionerFailure { iteration: usize },

    #[error("incomplete factorisation failed at row {row} (pivot {pivot:e})")]
    FactorisationFailure { row: usize, pivot: f64 },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
