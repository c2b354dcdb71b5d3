use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("refused: {0}")]
    Refused(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Sim(#[from] spins_sim::SimError),
    #[error(transparent)]
    Core(#[from] spins_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
