//! Error types shared across the crate.

use std::path::PathBuf;

/// Unified error type for dataset, gateway, memory, brain, and simulator
/// operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("aggregate undefined: {0}")]
    UndefinedAggregate(String),

    /// The provider reply failed schema validation twice in a row.
    #[error("llm format error for template `{tag}`: {detail}")]
    LlmFormat { tag: String, detail: String },

    #[error("llm transport error: {0}")]
    LlmTransport(String),

    /// The scripted provider has no rule (or no responses left) for a call.
    #[error("script exhausted: {0}")]
    ScriptExhausted(String),

    #[error("similarity undefined between {x} and {y}: no self-paths on either side")]
    SimilarityUndefined { x: String, y: String },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("empty report: {0}")]
    EmptyReport(String),

    #[error("item {0} has no thumbnail reference")]
    NoThumbnail(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
