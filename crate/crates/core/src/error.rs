use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("input not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("parse error at record {record}, line {line}: {message}")]
    Parse {
        record: usize,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("undefined perplexity: no scoreable tokens")]
    UndefinedPerplexity,

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("read sets are not aligned: {0}")]
    Alignment(String),

    #[error("undefined gain: original reads contain no errors")]
    UndefinedGain,

    #[error("external tool failed: {message} (stderr: {})", stderr_path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<none>".into()))]
    Adapter {
        message: String,
        exit_code: Option<i32>,
        stderr: String,
        stderr_path: Option<PathBuf>,
    },

    #[error("correction at parameter value {value} failed: {source}")]
    Corrector {
        value: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
