use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no scenarios")]
    NoScenarios,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("control not admissible: |h| = {value} exceeds 1 at scenario {scenario}, step {step}")]
    ControlNotAdmissible { value: f64, scenario: usize, step: usize },
    #[error("maturity {0} is not on the maturity grid")]
    OffGrid(f64),
    #[error("maturity grid is missing required nodes {0:?}")]
    MissingNodes(Vec<f64>),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("non-finite value at scenario {scenario}, time index {step}, maturity index {maturity}")]
    NonFinite { scenario: usize, step: usize, maturity: usize },
    #[error("non-finite weight at scenario {scenario}, step {step}, leg {leg}")]
    NonFiniteWeight { scenario: usize, step: usize, leg: usize },
    #[error("divergence suspected: Cauchy distances {0:?}")]
    Divergence(Vec<f64>),
    #[error("optimizer did not converge after {iterations} iterations (last gradient norm {grad_norm:e})")]
    Optimizer { iterations: usize, grad_norm: f64, trace: Vec<f64> },
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("negative payoff {value} in scenario {scenario}")]
    NegativePayoff { scenario: usize, value: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
