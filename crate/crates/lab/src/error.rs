use std::path::PathBuf;

use wgangp_core::Error;

/// Failures of a lab run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// 2 for numeric failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(Error::Diverged { .. } | Error::NonFinite { .. } | Error::NonFiniteInput { .. }) => 2,
            _ => 1,
        }
    }
}
