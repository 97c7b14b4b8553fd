use nalgebra::DVector;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A potential or gradient evaluation produced a non-finite value.
    #[error("non-finite {what} while probing coordinate {coordinate}")]
    Evaluation { what: &'static str, coordinate: usize },

    /// The model does not provide something the operation needs (e.g. a Hessian).
    #[error("capability missing: {0}")]
    Capability(String),

    /// Inputs outside the region where a bound or formula is valid.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Parameters are valid but no admissible plan exists.
    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("gradient descent did not converge after {iterations} iterations (|grad| = {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: DVector<f64>,
    },

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A Markov chain left the finite reals.
    #[error("chain state became non-finite at step {step}")]
    Divergence { step: u64 },

    /// At least one chain of an ensemble failed; entries are `(chain index, error)`.
    #[error("{} chain(s) failed, first: chain {} ({})", .0.len(), .0[0].0, .0[0].1)]
    Chains(Vec<(usize, Error)>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
