use std::path::Path;

use thiserror::Error;

/// CLI failure classes, each mapped to a distinct exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Broken or inconsistent run configuration. Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable, malformed or inconsistent data and artifacts. Exit
    /// code 3.
    #[error("data error: {0}")]
    Data(String),

    /// A numeric routine failed or was asked for the impossible. Exit
    /// code 4.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<ews_core::Error> for CliError {
    fn from(e: ews_core::Error) -> Self {
        use ews_core::Error as E;
        match e {
            E::InvalidParameter { .. } => CliError::Config(e.to_string()),
            E::LengthMismatch { .. }
            | E::DegenerateClasses(_)
            | E::EmptyInput(_)
            | E::Panel(_)
            | E::Csv(_) => CliError::Data(e.to_string()),
            E::NonFinite { .. } | E::Numeric(_) | E::Infeasible(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
