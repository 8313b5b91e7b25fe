use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid demonstration: {0}")]
    InvalidDemonstration(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no candidate abstractions: the demonstration has no objects")]
    EmptyCandidates,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown configuration key `{0}`")]
    UnknownConfigKey(String),

    #[error("DMP integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("demo generation failed: {0}")]
    Generation(String),

    #[error("pipeline failure: {0}")]
    PipelineFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
