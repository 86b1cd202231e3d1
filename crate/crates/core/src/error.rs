use thiserror::Error;

/// Errors surfaced by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    ConfigList(Vec<String>),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("diverged state at step {step} (stream {stream}): {detail}")]
    Diverged {
        step: usize,
        stream: u64,
        detail: String,
    },

    #[error("bound unavailable: {0}")]
    BoundUnavailable(String),

    #[error("not configured: {0}")]
    NotConfigured(String),

    #[error("insufficient samples: need {need}, have {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
