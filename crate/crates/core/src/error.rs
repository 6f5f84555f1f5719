use std::path::PathBuf;

/// Errors raised across the simulator, learners and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: unknown map, bad key, too many agents, hash mismatch.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an interface contract (bad action index, stale batch, shape mismatch).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Non-finite loss, ratio or gradient.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint error in {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    /// Frozen parameters changed during adversarial training.
    #[error("frozen victim parameters were mutated: {0}")]
    FrozenViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors the CLI reports with the configuration exit status.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Checkpoint { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
