use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("oracle returned non-finite value")]
    NonFiniteOracle,
    #[error("objective not finite along step")]
    NonFiniteObjective,
    #[error("stepsize underflow")]
    StepsizeUnderflow,
    #[error("empty box")]
    EmptyBox,
    #[error("subsolver contract violated")]
    SubsolverContract,
    #[error("inhomogeneous reports")]
    InhomogeneousReports,
    #[error("no reports to aggregate")]
    EmptyReports,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
