#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;
