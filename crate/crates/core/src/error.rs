use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A config document violated the schema; `path` is a JSON-pointer-like location.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("system failed validation: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("level {level} would have {predicted} edges, above the cap of {cap}")]
    SizeCap {
        level: u32,
        predicted: String,
        cap: u64,
    },

    #[error("colour {colour}: more than {limit} simple terminal paths; supply the distance family by hand")]
    PathGuard { colour: usize, limit: usize },

    #[error("edge {edge} has non-positive or non-finite resistance {value}")]
    BadWeight { edge: usize, value: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
