use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("backward pass requested without a recorded forward cache")]
    MissingCache,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("empty ground truth mask")]
    EmptyGroundTruth,
    #[error("no nonzero pairs")]
    NoNonzeroPairs,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
