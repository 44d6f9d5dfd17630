use thiserror::Error;

pub type Result<T> = std::result::Result<T, SchwarzError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchwarzError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrand returned a non-finite value at a quadrature node.
    #[error("integrand is not finite at t = {node} (value {value})")]
    Integration { node: f64, value: f64 },

    /// An iterative solve stopped before reaching its tolerance.
    #[error("solver did not converge after {iterations} iterations: {message} (last residual {residual:e})")]
    Solver {
        message: String,
        residual: f64,
        iterations: usize,
    },

    /// The problem data selects a different solver branch.
    #[error("branch error: {0}")]
    Branch(String),

    /// A stated precondition of a linear-algebra identity does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The discretized convex program did not certify its optimum.
    #[error("oracle did not converge: {message} (duality gap {gap:e})")]
    Oracle { message: String, gap: f64 },
}

impl SchwarzError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SchwarzError::Domain(msg.into())
    }
}
