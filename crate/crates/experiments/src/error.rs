use std::path::PathBuf;

use dishnet_core::CoreError;
use dishnet_data::DataError;
use dishnet_metrics::MetricsError;
use dishnet_sr::SrError;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sr(#[from] SrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExpError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 validation, 2 I/O, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        fn sr(e: &SrError) -> u8 {
            match e {
                SrError::Io(_) | SrError::Core(CoreError::Io(_)) => 2,
                _ => 1,
            }
        }
        match self {
            ExpError::Io { .. } | ExpError::Core(CoreError::Io(_)) => 2,
            ExpError::Numeric(_) => 3,
            ExpError::Sr(e) => sr(e),
            ExpError::Data(DataError::Io { .. }) => 2,
            ExpError::Data(DataError::Image { source, .. } | DataError::Sr(source)) => sr(source),
            _ => 1,
        }
    }
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: impl AsRef<std::path::Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| ExpError::io(path, e))
}
