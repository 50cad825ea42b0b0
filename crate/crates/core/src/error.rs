use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error(
        "unitary logarithm is branch-ambiguous: eigenphase {phase:.6} lies within 1e-6 of ±π; \
         evaluate over a shorter time so the effective phases stay inside (-π, π)"
    )]
    BranchAmbiguous { phase: f64 },

    #[error("missing value for parameter {0}")]
    MissingParameter(String),

    #[error("unexpected parameter {0} not present in the network")]
    UnexpectedParameter(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid control sequence: {0}")]
    InvalidSequence(String),

    #[error("C-space construction did not converge after {iterations} sweeps (dimension {dimension})")]
    NonConvergence { iterations: usize, dimension: usize },

    #[error("projection residual {residual:.3e} exceeds tolerance {tolerance:.1e}: {context}")]
    ResidualBreach { residual: f64, tolerance: f64, context: String },

    #[error("order {requested} exceeds configured cap {cap}")]
    OrderCap { requested: usize, cap: usize },

    #[error("target for graph {graph} is infeasible (distance {distance:.3e})")]
    Infeasible { graph: String, distance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("too few valid points for fit: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
