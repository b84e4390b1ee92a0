use thiserror::Error;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("optimizer failed: {0}")]
    Optimizer(pram_core::Error),
    #[error("certification failed: {0}")]
    Certification(pram_core::Error),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Optimizer(_) => 3,
            CliError::Certification(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    /// Classifies a core error raised while reading or validating input.
    pub fn input(err: pram_core::Error) -> Self {
        match err {
            pram_core::Error::Io(e) => CliError::Io(e.to_string()),
            pram_core::Error::Csv(e) => CliError::Io(e.to_string()),
            pram_core::Error::CertificationFailed { .. } => CliError::Certification(err),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
