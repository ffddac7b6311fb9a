use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("index error in {op}: {detail}")]
    Index { op: &'static str, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid model spec: {0}")]
    Construction(String),

    #[error("malformed checkpoint: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(CoreError::Dimension {
        op,
        detail: detail.into(),
    })
}
