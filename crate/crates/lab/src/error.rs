use std::io;
use std::path::PathBuf;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    ConfigFile { path: PathBuf, message: String },
    /// One line per violated invariant.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{}:{line}: {message}", path.display())]
    Store { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] recscale_core::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// 1 for usage and configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::ConfigFile { .. } | LabError::Invalid(_) | LabError::Usage(_) => 1,
            LabError::Core(recscale_core::Error::Config { .. }) => 1,
            _ => 2,
        }
    }
}
