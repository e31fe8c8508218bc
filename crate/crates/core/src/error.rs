use thiserror::Error;

use crate::glm::{FitOutcome, Model};
use crate::isotonic::RetargetResult;
use crate::mrtrain::TrainTrace;
use crate::projector::SolverState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the divergence domain: {0}")]
    DomainViolation(String),

    #[error("cone precondition violated: {0}")]
    ConeViolation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid divergence specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no sign change found while bracketing the projection multiplier")]
    BracketFailure,

    /// An iterative routine ran out of iterations. The last iterate is kept.
    #[error("{0}")]
    NoConvergence(Box<NoConvergence>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset contains no documents")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Last iterate of a routine that hit its iteration cap.
#[derive(Debug, Clone)]
pub enum NoConvergence {
    Retarget(RetargetResult),
    Solver(SolverState),
    Fit(FitOutcome),
    Train { model: Model, trace: TrainTrace },
}

impl std::fmt::Display for NoConvergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoConvergence::Retarget(r) => {
                write!(f, "retargeting did not converge after {} iterations", r.iterations)
            }
            NoConvergence::Solver(s) => write!(
                f,
                "row-action solver did not converge after {} sweeps (residual {:.3e})",
                s.iteration, s.residual
            ),
            NoConvergence::Fit(o) => write!(
                f,
                "model fit did not converge after {} iterations (gradient norm {:.3e})",
                o.iterations, o.grad_norm
            ),
            NoConvergence::Train { trace, .. } => write!(
                f,
                "training did not converge after {} outer iterations",
                trace.iterations.len()
            ),
        }
    }
}

impl Error {
    pub(crate) fn no_convergence(partial: NoConvergence) -> Self {
        Error::NoConvergence(Box::new(partial))
    }

    pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
