use std::path::PathBuf;

use crate::mcsa::FaultType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violates its documented invariant. `field` is a dotted path.
    #[error("invalid {field}: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("zero slip: sidebands degenerate onto f1")]
    ZeroSlip,

    #[error("bearing geometry is required for {0} but no `bearing` block was given")]
    MissingBearing(FaultType),

    #[error("{fault}: {source}")]
    Fault {
        fault: FaultType,
        #[source]
        source: Box<Error>,
    },

    #[error("{fault} is not a bearing fault")]
    NotBearingFault { fault: FaultType },

    #[error("{path}: row {row}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("{0}: file contains no samples")]
    EmptyInput(PathBuf),

    #[error("signal has {len} samples, fewer than one segment of {segment_len}")]
    SignalTooShort { len: usize, segment_len: usize },

    #[error("expected spectrum stage {expected}, found {found}")]
    StageMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {0} is not part of this model or configuration")]
    UnknownLabel(String),

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("normalization mode mismatch: model uses {model}, request uses {requested}")]
    NormalizationMismatch {
        model: &'static str,
        requested: &'static str,
    },

    #[error("malformed container: {0}")]
    Container(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
