use std::path::PathBuf;

/// Failures surfaced by the command-line tools. Each maps to an exit code:
/// 2 for usage/configuration problems, 3 for I/O and data problems.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Inputs that do not correspond (frame counts, shapes, no shared frames).
    #[error("{0}")]
    Mismatch(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] lptem_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Mismatch(_) | CliError::Config { .. } => 2,
            CliError::Io { .. } | CliError::Data { .. } => 3,
            CliError::Core(e) => match e {
                lptem_core::Error::InvalidParameter(_) | lptem_core::Error::InputMismatch(_) => 2,
                _ => 3,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data { path: path.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
