use std::path::Path;

/// Exit code for usage errors (unknown flags, malformed command lines).
pub const EXIT_USAGE: i32 = 1;
/// Exit code for rejected inputs and configurations.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numerical failures and failed checks.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mixwass_core::Error),
    /// A run did not reproduce, or a check it performs failed.
    #[error("{0}")]
    Check(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn parse(path: &Path, line: u64, msg: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Check(_) => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}
