//! Functional-relation verifier for transfer matrices and Q-operators on twisted
//! spin-1/2 chains. Operators are normalized by a profile fitted on a single site;
//! the relations among them are then checked on longer chains by the `frv` binary.

pub mod calibration;
pub mod config;
pub mod relations;
pub mod suites;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Qloop(#[from] qloop::Error),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
