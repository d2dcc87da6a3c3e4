use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fidelity {fidelity} out of range for {n_fidelities} fidelities")]
    FidelityOutOfRange { fidelity: usize, n_fidelities: usize },

    #[error("matrix factorization failed ({what}) after jitter {jitter:e}")]
    Factorization { what: &'static str, jitter: f64 },

    #[error("integrand is not finite at node {node}")]
    NonFiniteIntegrand { node: f64 },

    #[error("could not bracket quantile {level} of the max-value distribution")]
    Bracket { level: f64 },

    #[error("objective evaluation failed: {0}")]
    Objective(String),
}

pub type Result<T> = std::result::Result<T, Error>;
