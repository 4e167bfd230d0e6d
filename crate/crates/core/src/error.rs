use thiserror::Error;

pub type Result<T, E = ReadoutError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch} (batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("mixture component {component} collapsed (total responsibility {mass:e})")]
    DegenerateComponent { component: usize, mass: f64 },

    #[error("state {0} has no samples in the label set")]
    MissingState(usize),

    #[error("model has no component-to-label map")]
    UnlabeledModel,

    #[error(transparent)]
    Format(#[from] FormatError),
}

impl ReadoutError {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            ReadoutError::NonFiniteLoss { .. } | ReadoutError::DegenerateComponent { .. }
        )
    }
}

/// Failures reading or writing the on-disk containers.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("not a {expected} file (magic line {found:?})")]
    BadMagic { expected: String, found: String },

    #[error("unsupported {kind} version {found} (this build reads version {supported})")]
    VersionMismatch {
        kind: String,
        found: u32,
        supported: u32,
    },

    #[error("payload checksum mismatch: header says {expected}, payload hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },

    #[error("file truncated: {0}")]
    Truncated(String),

    #[error("malformed file: {0}")]
    Malformed(String),
}
