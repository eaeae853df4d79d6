use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MecError {
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("{what}: no convergence after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// `tier` is zero-based; the message counts from one.
    #[error("tier {} is unstable (utilization {rho:.6} >= 1)", tier + 1)]
    Unstable { tier: usize, rho: f64 },

    #[error("every evaluated point has an unstable tier")]
    NoStablePoint,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl MecError {
    /// True for errors caused by a queue that cannot reach steady state.
    pub fn is_instability(&self) -> bool {
        matches!(self, MecError::Unstable { .. } | MecError::NoStablePoint)
    }
}

pub type Result<T> = core::result::Result<T, MecError>;
