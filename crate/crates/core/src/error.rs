use std::path::PathBuf;

/// Errors produced by the enhancement engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("empty feature set")]
    EmptyFeatureSet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("noise may only be added to a gram matrix of one input set with itself")]
    NoiseOnCrossGram,

    #[error("kernel matrix not positive definite")]
    NotPositiveDefinite,

    #[error("unreachable target from degenerate image ({0} is zero)")]
    UnreachableTarget(&'static str),

    #[error("ragged counterpart counts: {0}")]
    RaggedCounterparts(String),

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("non-finite objective or gradient at the starting point")]
    NonFiniteStart,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no test images")]
    EmptyTestSet,

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema violation in {}: {message}", .path.display())]
    Schema { path: PathBuf, message: String },

    #[error("version mismatch in {}: {message}", .path.display())]
    VersionMismatch { path: PathBuf, message: String },

    #[error("failed to decode {}: {message}", .path.display())]
    Decode { path: PathBuf, message: String },

    #[error("all {0} candidates failed to render")]
    AllCandidatesFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
