use thiserror::Error;

/// Errors produced by construction, measurement, recovery and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{0}")]
    Domain(String),

    #[error("matrix is not orthonormal: max |B^T B - I| entry {deviation:.3e} exceeds {tolerance:.1e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("{subsets} supports of size {k} exceed the enumeration guard of {limit}")]
    CombinatorialGuard { subsets: u128, k: usize, limit: u128 },

    #[error(
        "solver stopped after {iterations} iterations without meeting the optimality \
         tolerance (relative residual {residual:.3e}); best iterate attached"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("infeasible constraint system: phase-1 objective {gap:.3e} above zero")]
    Infeasible { gap: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
