use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("objective became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{0}")]
    Domain(String),

    #[error("no unmasked input-to-hidden weights remain")]
    Exhausted,

    #[error("class encoding: {0}")]
    Encoding(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
