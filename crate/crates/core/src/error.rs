//! Error type shared by all solvers.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    /// A model parameter violates the standing assumptions.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested closed form does not exist for these parameters.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// An asymptotic expansion was requested outside its validity regime.
    #[error("wrong asymptotic regime: {0}")]
    WrongRegime(String),

    /// An iterative solver failed to converge; the message carries a trace.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The value function is +infinity (positive risk aversion, delta <= 0).
    #[error("infinite value: {0}")]
    InfiniteValue(String),

    /// The discretization cannot resolve the problem (CFL-type violation).
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// Wealth hit zero under a policy that requires positive consumption.
    #[error("ruin: {0}")]
    Ruin(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
