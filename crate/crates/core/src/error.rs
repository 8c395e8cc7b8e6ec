use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("point lies outside the domain")]
    OutsideDomain,

    #[error("domain has no finite boundary to sample")]
    UnboundedBoundary,

    #[error("level function gradient vanishes at the boundary point")]
    DegenerateNormal,

    #[error("sampler failed to locate the level set W_a = {0}")]
    LevelSetNotFound(f64),

    #[error("non-finite state at step {step} (t = {time}); dt is likely too large for the landscape stiffness")]
    NonFinite { step: usize, time: f64 },

    #[error("no convergence within T_max = {0}")]
    NoConvergence(f64),

    #[error("path does not match the initial condition: {0}")]
    PathMismatch(String),

    #[error("singular linear system at row {0}")]
    SingularSystem(usize),

    #[error("no usable records: {0}")]
    EmptyRecords(String),

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
