use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: expected {expected} counts, found {found}")]
    PayloadLengthMismatch { expected: usize, found: usize },

    #[error("count overflow: {0}")]
    CountOverflow(String),

    #[error("empty file")]
    EmptyFile,

    #[error("invalid impulse response: {0}")]
    InvalidImpulseResponse(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),

    #[error(
        "degenerate rate: zero Poisson rate with positive count at pixel ({row}, {col}) bin {bin}"
    )]
    DegenerateRate { row: usize, col: usize, bin: usize },

    #[error("non-finite log-posterior at iteration {iter}: {diagnostics}")]
    NonFinite { iter: usize, diagnostics: String },

    #[error("empty trace: no retained samples")]
    EmptyTrace,
}

impl Error {
    /// Stable snake_case identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::MalformedHeader(_) => "malformed_header",
            Error::PayloadLengthMismatch { .. } => "payload_length_mismatch",
            Error::CountOverflow(_) => "count_overflow",
            Error::EmptyFile => "empty_file",
            Error::InvalidImpulseResponse(_) => "invalid_impulse_response",
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownConfigKey(_) => "unknown_config_key",
            Error::DegenerateRate { .. } => "degenerate_rate",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptyTrace => "empty_trace",
        }
    }
}
