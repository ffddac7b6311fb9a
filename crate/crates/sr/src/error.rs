use dishnet_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum SrError {
    #[error("malformed image: {0}")]
    Format(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SrError> = std::result::Result<T, E>;
