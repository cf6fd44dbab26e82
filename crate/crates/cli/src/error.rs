use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),

    #[error("config: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] sg2d_core::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// Exit status for this error (assertion breaches use 1).
    pub fn exit_code(&self) -> i32 {
        2
    }
}
