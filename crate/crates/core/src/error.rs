use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {0} is outside [0, 1)")]
    Domain(f64),

    #[error("degree is not an integer (total rise {rise}, residual {residual:e})")]
    NonIntegerDegree { rise: f64, residual: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("fixed point not found: {0}")]
    FixedPointNotFound(String),

    #[error("partition is not Markov: {0}")]
    NotMarkov(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("exponent inequality violated: lambda_abs = {lambda_abs}, lambda_max = {lambda_max}")]
    InvariantViolation { lambda_abs: f64, lambda_max: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid targets: {0}")]
    InvalidTargets(String),

    #[error("no bracket found: {0}")]
    NoBracket(String),

    #[error("blend radius {alpha} too large (must be below {limit})")]
    AlphaTooLarge { alpha: f64, limit: f64 },
}
