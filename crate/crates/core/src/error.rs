use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Per-interval Newton iteration did not reach the residual tolerance.
    #[error("newton solver failed on interval {interval} after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure {
        interval: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("missing derivative: {0}")]
    MissingDerivative(&'static str),

    /// The optimizer could not decrease the cost even at the smallest step.
    #[error("optimizer stalled at iteration {iteration}: cost {cost:.10e}, stationarity {stationarity:.3e}")]
    Stall {
        iteration: usize,
        cost: f64,
        stationarity: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
