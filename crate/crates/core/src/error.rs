use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape { op: &'static str, expected: String, got: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("loss is not connected to any trainable parameter")]
    Detached,

    #[error("invalid action {action} for agent {agent}: {reason}")]
    InvalidAction { agent: usize, action: usize, reason: &'static str },

    #[error("environment stepped after terminal")]
    StepAfterTerminal,

    #[error("all actions masked for agent {0}")]
    AllMasked(usize),

    #[error("empty batch")]
    EmptyBatch,

    #[error("replay buffer holds {have} episodes, need {need}")]
    InsufficientBuffer { have: usize, need: usize },

    #[error("joint action space {size} exceeds cap {cap}")]
    CapExceeded { size: f64, cap: u64 },

    #[error("invalid argument `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("mismatched runs: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::Shape { op, expected: format!("{expected:?}"), got: format!("{got:?}") }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
