use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid spin configuration: {0}")]
    InvalidSpins(String),

    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),

    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error("problem too large for exhaustive search: d = {d} exceeds {limit}")]
    TooLarge { d: usize, limit: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
