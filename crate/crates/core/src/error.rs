use thiserror::Error;

use crate::priors::PriorKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line passes within {0:e} m of the origin")]
    DegenerateLine(f64),
    #[error("plane passes within {0:e} m of the origin")]
    DegeneratePlane(f64),
    #[error("degenerate feature pair: {0}")]
    DegeneratePair(&'static str),
    #[error("structure prior extraction rejected for {kind:?}: offending clusters {clusters:?}")]
    ExtractionRejected {
        kind: PriorKind,
        clusters: Vec<(f64, f64)>,
    },
    #[error("structure prior database violates sparseness for {kind:?} near value {value}")]
    SparsenessViolated { kind: PriorKind, value: f64 },
    #[error("normal equations not positive definite; retry with a larger damping")]
    RetryWithLargerLambda,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
