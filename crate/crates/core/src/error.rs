use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mismatch: {0}")]
    Mismatch(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid dislocation: {0}")]
    Dislocation(String),
    #[error("invalid loop: {0}")]
    Loop(String),
    #[error("invalid field: {0}")]
    Field(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("solver aborted at iteration {iteration}: {reason}")]
    SolverAbort { iteration: usize, reason: String },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("circulation check failed: {0}")]
    Circulation(String),
    #[error("estimate violated: {0}")]
    EstimateViolated(String),
    #[error("invalid experiment: {0}")]
    Experiment(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
