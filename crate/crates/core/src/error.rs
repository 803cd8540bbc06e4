use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for {num_nodes} nodes")]
    Index { index: usize, num_nodes: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{count} predictors exceed the subset enumeration cap of {cap}")]
    Capacity { count: usize, cap: usize },

    #[error("stability ratio is undefined for an empty collection")]
    UndefinedRatio,

    #[error("sample size {got} is too small (need at least {need})")]
    SampleSize { got: usize, need: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("graph contains a cycle")]
    Cyclic,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
