use std::path::PathBuf;

use levyfp_core::Error as CoreError;

/// How a failure maps onto the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Io = 1,
    Validation = 2,
    NumericalGuard = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("eps = {eps}: {source}")]
    AtEps { eps: f64, source: CoreError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
}

impl AppError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        let core = match self {
            Self::Core(e) | Self::AtEps { source: e, .. } => e,
            Self::Config { .. } | Self::Format(_) => return ExitKind::Validation,
            Self::Io { .. } | Self::Json { .. } => return ExitKind::Io,
        };
        match core {
            CoreError::Resolution(_) | CoreError::Statistics { .. } | CoreError::Coverage(_) => {
                ExitKind::NumericalGuard
            }
            _ => ExitKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
