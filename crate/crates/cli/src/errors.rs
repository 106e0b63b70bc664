use std::io;

/// Process-level error classes, one per documented exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or missing configuration (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Numerical divergence; partial outputs were retained (exit 3).
    #[error("numerical divergence: {0}")]
    Divergence(String),
    /// The oracle battery found a failing check (exit 4).
    #[error("verification failed: {0}")]
    Verification(String),
    /// Anything else — I/O, serialization (exit 1).
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<glocad_core::Error> for CliError {
    fn from(e: glocad_core::Error) -> Self {
        match &e {
            // invalid numeric settings reaching the core are config mistakes
            glocad_core::Error::InvalidParameter(_) => CliError::Config(e.to_string()),
            glocad_core::Error::Divergence { .. } => CliError::Divergence(e.to_string()),
            // a training step hitting non-finite numbers is a divergence,
            // not an internal fault
            glocad_core::Error::TrainingAborted(_) => CliError::Divergence(e.to_string()),
            glocad_core::Error::NonFinite { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Other(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("json error: {e}"))
    }
}
