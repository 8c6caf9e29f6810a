use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LevinError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LevinError {
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("no qualifying candidate for step r={r} below cap {cap}")]
    CapExhausted { r: u64, cap: u128 },

    #[error("enumeration budget exceeded: {what} needs {needed}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("unrecognized rule: {0}")]
    UnrecognizedRule(String),

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LevinError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LevinError::Io {
            path: path.into(),
            source,
        }
    }
}
