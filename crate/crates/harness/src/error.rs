use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key '{key}': {message}")]
    Config { key: String, message: String },
    #[error("replicate {replicate} at n = {n}: {source}")]
    Replicate {
        n: usize,
        replicate: usize,
        #[source]
        source: catoni_core::Error,
    },
    #[error("{0}")]
    Core(#[from] catoni_core::Error),
    #[error("aborted: {0}")]
    Abort(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
