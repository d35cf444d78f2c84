use thiserror::Error;

/// Errors raised by the geometry, solver and flow layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("topology failure: {0}")]
    Topology(String),
    #[error("graph failure: {0}")]
    GraphFailure(String),
    #[error("orientation error: {0}")]
    Orientation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
