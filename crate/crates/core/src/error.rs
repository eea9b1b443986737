use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field error: {0}")]
    Field(String),

    #[error("expected a {expected} vector field")]
    Placement { expected: &'static str },

    #[error("invalid weight: water depth is negative at cell ({i}, {j})")]
    InvalidWeight { i: usize, j: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("base argument is not positive at cell ({i}, {j}): {value}")]
    Domain { i: usize, j: usize, value: f64 },

    #[error("hill constants violate: {}", .0.join("; "))]
    Constraint(Vec<String>),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("time factor radicand {radicand} is not positive at t = {t}")]
    BlowUp { t: f64, radicand: f64 },

    #[error("degenerate volume: V0 = {0}")]
    DegenerateVolume(f64),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    Stability { dt: f64, limit: f64 },

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("trajectories are not comparable: {0}")]
    Comparison(String),

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("test function is not supported away from the zero set at cell ({i}, {j})")]
    Support { i: usize, j: usize },

    #[error("no transport: boundary flux {flux} is not an outflow")]
    NoTransport { flux: f64 },

    #[error("unbalanced measures: {mu} vs {nu}")]
    Balance { mu: f64, nu: f64 },

    #[error("support size {size} exceeds the exact-solver cap {cap}; use the sinkhorn solver")]
    SizeCap { size: usize, cap: usize },

    #[error("sinkhorn did not converge in {iterations} iterations (marginal error {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("optimality certificate failed: duality gap {gap:e}")]
    Certificate { gap: f64 },

    #[error("no valid cells to compare")]
    EmptyComparison,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
