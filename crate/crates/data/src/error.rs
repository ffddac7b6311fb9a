use std::path::PathBuf;

use dishnet_sr::SrError;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: SrError,
    },
    #[error(transparent)]
    Sr(#[from] SrError),
}

impl DataError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
