use pnr_core::Error as CoreError;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Guard(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Guard(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::ResourceGuard(_) => CliError::Guard(msg),
            CoreError::Integration { .. }
            | CoreError::TraceDrift { .. }
            | CoreError::InsufficientTime(_)
            | CoreError::ZeroEfficiency
            | CoreError::ThresholdNotReached(_)
            | CoreError::Mismatch(_) => CliError::Numeric(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
