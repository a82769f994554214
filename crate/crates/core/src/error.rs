use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("invariant violation on field `{field}`: {detail}")]
    Invariant { field: String, detail: String },
    #[error("stepping past horizon: tick {tick} >= horizon_steps {horizon}")]
    PastHorizon { tick: u32, horizon: u32 },
    #[error("length mismatch: {detail}")]
    LengthMismatch { detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reasoner response invalid: {0}")]
    InvalidResponse(String),
    #[error("reasoner transport failed: {0}")]
    Transport(String),
}

impl Error {
    pub fn invariant(field: &str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
