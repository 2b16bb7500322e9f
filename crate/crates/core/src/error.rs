use thiserror::Error;

/// Errors raised by the zero-mode toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field is not divergence free: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotDivergenceFree { residual: f64, tolerance: f64 },

    #[error("gauge obstruction: mean field mode {mean:.3e} is nonzero, no periodic potential exists")]
    GaugeObstruction { mean: f64 },

    #[error("operator is singular: {0}")]
    SingularOperator(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("field data format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
