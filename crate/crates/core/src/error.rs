use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("overflow risk: {0}")]
    OverflowRisk(String),
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("level out of range: {0}")]
    LevelOutOfRange(String),
    #[error("range exceeded: {0}")]
    RangeExceeded(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("missing pieces: {0}")]
    MissingPieces(String),
    #[error("not a major arc: {0}")]
    NotMajorArc(String),
    #[error("range violation: {0}")]
    RangeViolation(String),
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Budget,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::BudgetExceeded(_) => ErrorClass::Budget,
            Error::QuadratureFailure(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
