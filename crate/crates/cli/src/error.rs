use std::path::PathBuf;

use diffkmeans_core::Error as CoreError;

/// Exit codes are a stable scripting contract: 0 success, 1 check failure,
/// 2 usage/config error, 3 numeric failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gradient check failed: max relative error {max_rel_error:.3e} at {worst_param}")]
    GradCheckFailed {
        max_rel_error: f64,
        worst_param: String,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::GradCheckFailed { .. } => 1,
            CliError::Core(CoreError::NonFiniteLoss { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
