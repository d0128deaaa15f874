use thiserror::Error;

/// Command failures, grouped by exit code: configuration problems exit
/// with 2, artifact problems with 3, numeric failures with 4.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Artifact(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    pub fn artifact(err: impl std::fmt::Display) -> Self {
        CliError::Artifact(err.to_string())
    }

    pub fn numeric(err: impl std::fmt::Display) -> Self {
        CliError::Numeric(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
