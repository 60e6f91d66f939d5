use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum AsqmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bitrate {bitrate} kbps outside supported range {min}-{max} kbps for codec {profile}")]
    BitrateOutOfRange {
        profile: String,
        bitrate: f64,
        min: f64,
        max: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("preference factor out of model domain: {0}")]
    ModelDomain(String),

    #[error("underdetermined system: {rows} rows, need at least {needed}")]
    Underdetermined { rows: usize, needed: usize },

    #[error("observation {row}: {message}")]
    Observation { row: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("stall placement failed: {0}")]
    Placement(String),

    #[error("startup did not complete within the {cap_secs} s wall-clock cap")]
    StartupTimeout { cap_secs: f64 },

    #[error("user {0} not found")]
    UserNotFound(String),

    #[error("audio {0} not found")]
    AudioNotFound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AsqmError>;
