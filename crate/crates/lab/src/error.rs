use std::io;

use thiserror::Error;

/// Failure of a lab run, each variant with its own process exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure{}: {message}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numeric { step: Option<u64>, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numeric { .. } => 3,
            LabError::Io(_) => 1,
        }
    }
}

impl From<atlas_core::Error> for LabError {
    fn from(e: atlas_core::Error) -> Self {
        match e {
            atlas_core::Error::Io(e) => LabError::Io(e),
            other => LabError::Numeric { step: other.failing_step(), message: other.to_string() },
        }
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(io::Error::other(e))
    }
}
