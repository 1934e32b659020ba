use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("not a distribution: {0}")]
    NotDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("channel: {0}")]
    Channel(String),
    #[error("not a self-coupling: {0}")]
    MarginalMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("inconsistent predicates: {0}")]
    Inconsistent(String),
    #[error("lp solver: {0}")]
    Lp(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
