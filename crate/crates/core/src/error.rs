use thiserror::Error;

/// Errors produced by the shaping library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("backward called on `{0}` without a recorded forward pass")]
    NoForward(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported modulation order {0} (must be a perfect square in 4..=1024)")]
    UnsupportedOrder(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid value for `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at step {step}; last batch: {dump}")]
    NonFiniteLoss { step: usize, dump: String },

    #[error("checkpoint is missing parameter `{0}`")]
    MissingParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
