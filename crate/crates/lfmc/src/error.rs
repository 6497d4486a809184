//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the simulator, trainer and evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Configuration file syntax or validation error with source location.
    #[error("{path}:{line}: {msg}")]
    ConfigParse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A caller violated an API contract (dimension mismatch etc.).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The integrator was fed or produced a non-finite state.
    #[error("integration error: {0}")]
    Integration(String),

    /// An environment step failed and the episode must be aborted.
    #[error("environment fault: {0}")]
    EnvFault(String),

    /// Training produced a non-finite loss; iteration aborted.
    #[error("training fault: {0}")]
    TrainFault(String),

    /// Checkpoint file could not be parsed.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// One or more requested analyses failed; the message lists them.
    #[error("{0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
