use thiserror::Error;

use crate::channel::UserId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Hermitian eigensolver did not converge")]
    EigenNoConvergence,

    #[error("left pencil matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate pencil: right matrix has no positive direction")]
    DegeneratePencil,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("degenerate beamformer for user {0}: zero desired-signal gain")]
    DegenerateBeamformer(UserId),

    #[error("zero self-gain for user {0}")]
    ZeroSelfGain(UserId),

    #[error("coupling system is infeasible (spectral radius {rho})")]
    Infeasible { rho: f64 },

    #[error("power iteration diverged after {iterations} iterations (infeasible power control)")]
    PowerDivergence { iterations: usize },

    #[error("power iteration did not converge in {iterations} iterations")]
    PowerNonConvergence { iterations: usize },

    #[error("dual iteration did not converge in {iterations} iterations (last step {residual:e})")]
    DualNonConvergence { iterations: usize, residual: f64 },

    #[error("dual iteration diverged after {iterations} iterations (master problem likely infeasible)")]
    DualDivergence { iterations: usize },

    #[error("invalid initial dual point: {0}")]
    InvalidStart(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
