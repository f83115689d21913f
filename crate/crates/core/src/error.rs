use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not place {requested} obstacles after {attempts} attempts (placed {placed})")]
    ObstaclePlacement {
        requested: usize,
        placed: usize,
        attempts: usize,
    },

    #[error("Riccati recursion failed at step {step}: R + B'PB is singular")]
    SingularRiccati { step: usize },

    #[error("Renyi-2 divergence undefined: 2*sigma0^2 - sigma1^2 = {margin} <= 0 in dimension {dim}")]
    DivergenceValidity { dim: usize, margin: f64 },

    #[error("RRT failed to reach the goal within {budget} nodes")]
    RrtFailure { budget: usize },

    #[error("RRT endpoint {0:?} lies inside an obstacle")]
    RrtBlockedEndpoint([f64; 2]),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
