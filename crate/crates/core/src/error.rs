use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {context}: {message}")]
    Malformed { context: String, message: String },

    #[error("event {event_id}: invalid {field}: {message}")]
    InvalidEvent {
        event_id: String,
        field: &'static str,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("signal too short: {len} samples at level {level}, need at least {required}")]
    SignalTooShort {
        len: usize,
        level: usize,
        required: usize,
    },

    #[error("non-finite loss in {phase} phase (cycle {cycle}, epoch {epoch})")]
    NonFiniteLoss {
        phase: &'static str,
        cycle: usize,
        epoch: usize,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("monotonicity check failed: {0}")]
    Monotonicity(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable machine-readable code, shared with the CLI error record and the C API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. } => "malformed",
            Error::InvalidEvent { .. } => "invalid_event",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SignalTooShort { .. } => "signal_too_short",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Empty(_) => "empty",
            Error::Monotonicity(_) => "monotonicity",
            Error::Json { .. } => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
