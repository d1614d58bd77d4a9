use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("diagonal entry {index} is nonpositive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("batch size {b} out of range for pool of {pool} without replacement")]
    BatchOutOfRange { b: usize, pool: usize },

    #[error("invalid problem construction: {0}")]
    InvalidProblem(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("batch size {batch} outside model domain (requires b > {edge})")]
    OutsideModelDomain { batch: f64, edge: f64 },

    #[error("step model requires kappa > 0, got {0}")]
    NonPositiveKappa(f64),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("no critical-batch estimator for {0}")]
    UnsupportedKind(String),

    #[error("no run reached the stop threshold")]
    NoFinishedRuns,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    pub fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
