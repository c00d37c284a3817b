use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("only one class present in the training data ({0} samples)")]
    SingleClass(usize),

    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("unknown team code {0:?}")]
    UnknownTeam(String),

    #[error("duplicate team code {0:?}")]
    DuplicateTeam(String),

    #[error("unparseable play description: {0}")]
    Unparseable(String),

    #[error("pooled covariance is singular; fit with shrinkage > 0 or use the svd solver")]
    SingularCovariance,

    #[error("data has zero variance")]
    ZeroVariance,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    MalformedLine { path: PathBuf, line: usize, message: String },

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("model kind {kind} cannot predict target {target}")]
    TargetMismatch { kind: String, target: String },

    #[error("no models loaded")]
    NoModels,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used by the HTTP API and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Empty(_) => "empty_input",
            Error::SingleClass(_) => "single_class",
            Error::WidthMismatch { .. } => "width_mismatch",
            Error::UnknownTeam(_) => "unknown_team",
            Error::DuplicateTeam(_) => "duplicate_team",
            Error::Unparseable(_) => "unparseable",
            Error::SingularCovariance => "singular_covariance",
            Error::ZeroVariance => "zero_variance",
            Error::Diverged { .. } => "diverged",
            Error::Fold { source, .. } => source.code(),
            Error::MalformedLine { .. } => "malformed_line",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::CorruptModel(_) => "corrupt_model",
            Error::TargetMismatch { .. } => "target_mismatch",
            Error::NoModels => "no_models",
            Error::Io(_) => "io",
            Error::Json(_) => "malformed_json",
        }
    }
}
