use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VmemError {
    /// Bad flags, unreadable or malformed inputs, invalid parameters.
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Snapshot(String),
    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Core(#[from] vmem_core::Error),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T, E = VmemError> = std::result::Result<T, E>;

impl VmemError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VmemError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            VmemError::Config(_) => 1,
            _ => 2,
        }
    }
}
