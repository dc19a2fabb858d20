use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A loss or gradient became non-finite during training.
    #[error("divergence at step {step}: {what}")]
    Divergence { step: u64, what: String },

    #[error("episode already terminated; call reset first")]
    EpisodeOver,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed CMDP file (line {line}): {msg}")]
    CmdpParse { line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a step index to divergence-class errors raised below the trainer.
    pub(crate) fn at_step(self, step: u64) -> Self {
        match self {
            Error::NonFinite(what) => Error::Divergence { step, what },
            Error::Divergence { what, .. } => Error::Divergence { step, what },
            other => other,
        }
    }
}
