use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scenario infeasible at record {ordinal}: {reason}")]
    Infeasible { ordinal: usize, reason: String },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("input width mismatch: model expects {expected} columns, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
