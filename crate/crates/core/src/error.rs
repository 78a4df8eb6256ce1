use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown verdict code `{0}`")]
    UnknownVerdict(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no redditor has more than {threshold} instances (max observed: {max_observed})")]
    ThresholdTooHigh { threshold: usize, max_observed: usize },

    #[error("unknown redditor `{0}`")]
    UnknownRedditor(String),

    #[error("missing {what} for instance `{instance_id}`")]
    MissingData { what: &'static str, instance_id: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("no fixture for prompt {0}")]
    NoFixture(String),

    #[error("could not parse completion ({reason}); raw reply: {raw:?}")]
    Parse { reason: String, raw: String },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("missing artifact `{artifact}`; run `solar {producer}` first")]
    MissingUpstream {
        artifact: String,
        producer: &'static str,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(reason: impl Into<String>, raw: impl Into<String>) -> Self {
        Error::Parse {
            reason: reason.into(),
            raw: raw.into(),
        }
    }

    /// Stable machine-readable kind, used in CLI error reports and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::UnknownVerdict(_) => "unknown_verdict",
            Error::InvalidInput(_) => "invalid_input",
            Error::Empty(_) => "empty",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ThresholdTooHigh { .. } => "threshold_too_high",
            Error::UnknownRedditor(_) => "unknown_redditor",
            Error::MissingData { .. } => "missing_data",
            Error::Degenerate(_) => "degenerate",
            Error::Transport(_) => "transport",
            Error::Provider(_) => "provider",
            Error::NoFixture(_) => "no_fixture",
            Error::Parse { .. } => "parse",
            Error::ManifestMismatch(_) => "manifest_mismatch",
            Error::MissingUpstream { .. } => "missing_upstream",
        }
    }
}
