use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimators, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("sample too short: {what} requires n >= {required}, got n = {actual}")]
    SampleTooShort {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("parse error at line {line}, token {token}: {message}")]
    Parse {
        line: usize,
        token: usize,
        message: String,
    },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("experiment failed: {errored} of {replications} replications errored")]
    TooManyErrors { errored: usize, replications: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code: 1 for validation problems, 2 for runtime/numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::SampleTooShort { .. }
            | Error::Parse { .. }
            | Error::InvalidSpec(_)
            | Error::Json(_) => 1,
            Error::DegenerateTable(_)
            | Error::Numerical { .. }
            | Error::TooManyErrors { .. }
            | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
