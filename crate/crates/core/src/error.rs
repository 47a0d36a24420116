use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed config, out-of-domain point, non-SPD metric.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed (singular system, non-finite energy, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two routes that must agree did not.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Json(_) => 2,
            Error::Numerical(_) | Error::Consistency(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
