use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input is not orthonormal (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("zero vector")]
    ZeroVector,

    #[error("premise violated: {0}")]
    PremiseViolated(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("input states are not all product states (state {index} has defect {defect:.3e})")]
    NotProduct { index: usize, defect: f64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("zero polynomial")]
    ZeroPolynomial,
}

pub type Result<T> = std::result::Result<T, Error>;
