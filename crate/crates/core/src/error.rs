use std::io;

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("non-finite {what} for batch sample {index}")]
    NonFiniteSample { what: &'static str, index: usize },

    #[error("ascent diverged at step {step}: objective decreased for {window} consecutive steps")]
    Divergence { step: usize, window: usize },

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("idx parse error at byte {offset}: {msg}")]
    Idx { offset: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
