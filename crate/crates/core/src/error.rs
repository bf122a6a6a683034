use alloc::string::String;

use crate::poisson::FieldError;

/// Which quadrature node family a stage evaluation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSet {
    /// The `k1` nodes used for the `S(y)` coefficients.
    Structure,
    /// The `k2` nodes used for the `∇H(y)` coefficients.
    Gradient,
}

impl core::fmt::Display for NodeSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NodeSet::Structure => f.write_str("structure"),
            NodeSet::Gradient => f.write_str("gradient"),
        }
    }
}

/// Errors produced by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A method or model parameter violates its precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// The violated bound.
        reason: String,
    },
    /// Newton refinement of a Gauss-Legendre node failed. Indicates a bug.
    #[error("Gauss-Legendre node {node} of the {k}-point rule did not converge")]
    QuadratureNotConverged {
        /// Number of nodes requested.
        k: usize,
        /// Offending node index.
        node: usize,
    },
    /// A model field could not be evaluated.
    #[error(transparent)]
    Field(#[from] FieldError),
    /// A model field failed at a quadrature node inside a step.
    #[error("{set} node {index}: {source}")]
    FieldAtNode {
        /// Node family.
        set: NodeSet,
        /// Zero-based node index.
        index: usize,
        /// Underlying failure.
        source: FieldError,
    },
    /// The nonlinear iteration used up its iteration budget.
    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NonConvergence {
        /// Iterations performed.
        iterations: usize,
        /// Infinity norm of the last increment.
        last_update: f64,
    },
    /// The increments blew up, which signals a stepsize above the contraction threshold.
    #[error("iteration diverged at iteration {iteration} (update {update:e})")]
    Divergence {
        /// Iteration at which the blow-up was detected.
        iteration: usize,
        /// Infinity norm of the offending increment.
        update: f64,
    },
    /// An LU factorization met a singular matrix.
    #[error("singular iteration matrix")]
    SingularMatrix,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for the two nonlinear-solver failures.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Divergence { .. })
    }

    /// The underlying field error, if any.
    pub fn field_error(&self) -> Option<&FieldError> {
        match self {
            Error::Field(e) | Error::FieldAtNode { source: e, .. } => Some(e),
            _ => None,
        }
    }
}

/// Crate result alias.
pub type Result<T> = core::result::Result<T, Error>;
