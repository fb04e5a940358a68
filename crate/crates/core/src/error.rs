use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{family} expects {expected} hyperparameters, got {found}")]
    Arity {
        family: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("Cholesky factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("Gram matrix is indefinite (quadratic form {value:e})")]
    IndefiniteGram { value: f64 },

    #[error("SVR solver did not converge within {iterations} iterations")]
    SvrNotConverged { iterations: usize },

    #[error("objective failed at kernel {kernel_index} phi {phi:?}: {message}")]
    Objective {
        kernel_index: usize,
        phi: Vec<f64>,
        message: String,
    },
}
