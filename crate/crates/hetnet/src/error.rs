use std::path::PathBuf;

use mec_core::MecError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HetnetError {
    #[error(transparent)]
    Model(#[from] MecError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HetnetError>;

impl HetnetError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HetnetError::Io { path: path.into(), source }
    }

    /// 0 ok, 1 usage or configuration, 2 unstable queue, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HetnetError::Model(e) => match e {
                MecError::Unstable { .. } | MecError::NoStablePoint => 2,
                MecError::Config(_) | MecError::Unsupported(_) | MecError::Precondition(_) => 1,
                MecError::Domain { .. } | MecError::NoConvergence { .. } | MecError::Numerical(_) | MecError::Resource(_) => 3,
            },
            HetnetError::Io { .. } | HetnetError::Parse { .. } | HetnetError::Usage(_) => 1,
            HetnetError::Csv(_) | HetnetError::Json(_) => 1,
        }
    }
}
