use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid boundary parameters: {0}")]
    InvalidBoundary(String),
    #[error("zero measure has no equivalence class")]
    ZeroMeasure,
    #[error("eigenvalue search failed: {0}")]
    EigenSearch(String),
    #[error("kernel truncation too coarse: increase n_modes or t ({0})")]
    KernelTruncation(String),
    #[error("time {time} is not on the step lattice (dt = {dt})")]
    OffLattice { time: f64, dt: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear program did not converge: {0}")]
    LpFailure(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
