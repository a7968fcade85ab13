use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bayes_ergm::Error),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("{}: {msg}", .path.display())]
    Malformed { path: PathBuf, msg: String },
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "not-found",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Malformed { .. } => "input",
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn malformed(path: &Path, msg: impl ToString) -> CliError {
        CliError::Malformed { path: path.to_path_buf(), msg: msg.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
