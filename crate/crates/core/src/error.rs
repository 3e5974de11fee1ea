use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a formula (e.g. a non-positive distance).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or input record failed validation.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A matrix handed to a Hermitian routine is not Hermitian.
    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    /// The gap minimum sits on the edge of the scanned bracket.
    #[error("gap minimum at bracket edge eta = {eta:e}; widen the eta bracket [{lo:e}, {hi:e}]")]
    BracketEdge { eta: f64, lo: f64, hi: f64 },

    /// A problem is too large for the requested method.
    #[error("capacity guard: {method} supports n <= {limit}, got n = {n}")]
    Capacity {
        method: &'static str,
        limit: usize,
        n: usize,
    },

    /// Integration diverged or violated a physical bound.
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
