//! Error types shared across the simulator.

use thiserror::Error;

/// Top-level error type for simulator operations.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid configuration or invalid arguments to an operation.
    #[error("config error: {0}")]
    Config(String),
    /// A numeric routine failed (singular covariance, non-convergence past
    /// every fallback, NaN propagation).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Filesystem output failed; the offending path is included.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SimError::Numeric(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code contract: 1 config, 2 numeric, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            SimError::Numeric(_) => 2,
            SimError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
