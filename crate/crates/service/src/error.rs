use ifgame_core::GameError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Game(#[from] GameError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("log file {0} already exists")]
    SessionExists(String),

    #[error("log error: {0}")]
    Log(String),

    #[error("scenario hash {provided} does not match the logged configuration {logged}")]
    HashMismatch { logged: String, provided: String },
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
