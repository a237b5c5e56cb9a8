use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series caps differ: {left} vs {right}")]
    CapMismatch { left: usize, right: usize },

    #[error("closed form leaves a nonzero imaginary coefficient at power {power}")]
    ImaginaryResidue { power: usize },

    #[error("order {order}: nonzero coefficient at power {power}, below the divisor power")]
    LeadingOrder { order: usize, power: usize },

    #[error("closed form has negative powers of theta and cannot be evaluated at 0")]
    SingularAtZero,

    #[error("{n} qubits exceeds the {mode} memory cap of {cap}")]
    MemoryGuard {
        n: usize,
        cap: usize,
        mode: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finder did not converge: {reason} (trace: {trace:?})")]
    NoConvergence {
        reason: String,
        trace: Vec<(f64, f64)>,
    },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tol:e}")]
    Quadrature { value: f64, estimate: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
