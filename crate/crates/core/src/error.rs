//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by dense tensor and matrix-product operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range for rank-{rank} tensor")]
    IndexOutOfRange { index: usize, rank: usize },

    #[error("duplicate index {0} in contraction or split")]
    DuplicateIndex(usize),

    #[error("split indices must be a nonempty proper subset of the tensor indices")]
    InvalidSplit,

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("matrix-product chains have mismatched lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("site {site} out of range for chain of length {len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("linear-algebra backend failure: {0}")]
    Backend(String),
}

/// Errors raised by the physics layers: bath kernels, evolution engines,
/// oracles.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input is not a density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("memory lag {lag} outside window [0, {n_c}]")]
    LagOutOfWindow { lag: usize, n_c: usize },

    #[error("state size {size} exceeds the configured bound {bound}")]
    SizeBound { size: u64, bound: u64 },

    #[error("combined memory depth n_c + n_d = {total} exceeds the budget {budget}; rerun with the budget override to proceed")]
    BudgetExceeded { total: usize, budget: usize },

    #[error("integration did not converge: {0}")]
    NonConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type TensorResult<T> = Result<T, TensorError>;
pub type SimResult<T> = Result<T, SimError>;
