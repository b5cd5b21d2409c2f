use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("profile grid violates its invariants: {0}")]
    Grid(String),
    #[error("factor count mismatch: grid has {grid}, configuration has {config}")]
    FactorMismatch { grid: usize, config: usize },
    #[error("singular geometry: f vanishes at interior node {node} (t = {t})")]
    SingularGeometry { node: usize, t: f64 },
    #[error("curvature constants are not pinned: {0}")]
    Unpinned(String),
    #[error("curvature oracle did not converge: estimated error {estimate:e}")]
    OracleConvergence { estimate: f64 },
    #[error("oracle state rejected: {0}")]
    OracleState(String),
    #[error("no soliton found in range: {0}")]
    NoSoliton(String),
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64, last: Vec<f64> },
    #[error("Kähler condition drifted to {drift:e} (tolerance {tolerance:e})")]
    KaehlerDrift { drift: f64, tolerance: f64 },
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("solution is not gauge-normalized (relative defect {0:e})")]
    NotNormalized(f64),
    #[error("perturbation profile invalid: {0}")]
    Profile(String),
    #[error("matrix violates the block condition at ({0}, {1})")]
    BlockCondition(usize, usize),
    #[error("matrix is not J-anti-invariant (defect {0:e})")]
    NotAntiInvariant(f64),
    #[error("division guard: {0}")]
    Division(String),
    #[error("identity check failed: {0}")]
    Identity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
