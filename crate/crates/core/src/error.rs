use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("spin value must be +1 or -1, got {0}")]
    InvalidSpin(i64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("covariance decay is not geometric (fitted rate {kappa_hat})")]
    NonGeometricDecay { kappa_hat: f64 },

    #[error("refused: zero dispersion (sigma^2 = {0:e})")]
    ZeroDispersion(f64),

    #[error("not in regime: {0}")]
    NotInRegime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
