use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("amplitude for {occupation:?} lies outside the truncated basis")]
    OutsideBasis { occupation: Vec<u8> },
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensity(String),
    #[error("incompatible bases: {0}")]
    BasisMismatch(String),
    #[error("truncation discards weight {0:e}")]
    Truncation(f64),
    #[error("weights must be non-negative and sum to one")]
    BadWeights,
    #[error("state has support outside the single-excitation sector (weight {0:e})")]
    Leakage(f64),
    #[error("mode count {0} is not supported here")]
    ModeCount(usize),
    #[error("no single-excitation component (q = 0)")]
    NoSingleExcitation,
    #[error("target q = {0} cannot be reached by this family")]
    Unattainable(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("no root found: {0}")]
    NoRoot(String),
    #[error("internal inconsistency: {0}")]
    Consistency(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
