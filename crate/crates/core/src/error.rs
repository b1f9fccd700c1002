use thiserror::Error;

/// Errors reported by the solvers and the special-function layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("requested order {requested} exceeds the supported maximum {max}")]
    Capacity { requested: usize, max: usize },

    #[error("Bessel Y overflowed at order {order} for x = {x}")]
    Overflow { order: usize, x: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("singular system in mode {mode}")]
    SingularMode { mode: i64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("factorizing {dofs} unknowns needs about {bytes} bytes, above the limit of {limit}")]
    Memory { dofs: usize, bytes: usize, limit: usize },

    #[error("linear solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
