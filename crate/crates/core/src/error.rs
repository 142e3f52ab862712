use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    Size(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("trajectory diverged at t = {time}")]
    Diverged { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
