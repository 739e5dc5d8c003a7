use thiserror::Error;

/// Command-level failures, classified by exit code: 1 for usage or
/// configuration problems, 2 for data problems, 3 for fit failures under
/// `--strict`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Fit(_) => 3,
        }
    }
}
