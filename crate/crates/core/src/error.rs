use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("non-stochastic row {row} ('{label}'): sum = {sum}")]
    NonStochasticRow { row: usize, label: String, sum: f64 },

    #[error("empty {0} set")]
    EmptySet(&'static str),

    #[error("duplicate state label '{0}'")]
    DuplicateLabel(String),

    #[error("unknown state label '{0}'")]
    UnknownLabel(String),

    #[error("restriction to the transient set is not primitive: {0}")]
    NonPrimitive(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("initial distribution puts mass {0:e} on the absorbing set")]
    AlphaInGoal(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid control function: {0}")]
    InvalidControl(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no surviving layer-0 mass at t = {0}")]
    ZeroMass(usize),

    #[error("horizon: {0}")]
    Horizon(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
