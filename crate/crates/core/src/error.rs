use thiserror::Error;

/// Failure modes of the solver. Every variant aborts the current run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("non-physical state in {context} at cell ({j}, {k}): rho = {rho:e}, p = {p:e}")]
    NonPhysicalState {
        context: &'static str,
        j: isize,
        k: isize,
        rho: f64,
        p: f64,
    },

    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Helmholtz operator is not positive definite: sigma = {sigma:e}, requires sigma > {bound:e}")]
    IndefiniteSystem { sigma: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// I/O failure, message passed through unchanged.
    #[error("{0}")]
    Io(String),
}

impl SolverError {
    pub(crate) fn nonphysical(context: &'static str, j: isize, k: isize, rho: f64, p: f64) -> Self {
        SolverError::NonPhysicalState {
            context,
            j,
            k,
            rho,
            p,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolverError::NonPhysicalState { .. } => 2,
            SolverError::NoConvergence { .. } | SolverError::IndefiniteSystem { .. } => 3,
            SolverError::InvalidConfig(_) | SolverError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for SolverError {
    fn from(e: std::io::Error) -> Self {
        SolverError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
