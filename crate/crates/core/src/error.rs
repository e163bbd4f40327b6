use crate::flow::FlowTrajectory;
use crate::solver::SolveReport;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("recession limit did not settle after {doublings} doublings (last ratio {last})")]
    Divergence { doublings: usize, last: f64 },

    #[error(
        "Newton iteration stopped after {} iterations with residual {:.3e}",
        best.iterations,
        best.residual
    )]
    NonConvergence {
        /// Best iterate reached before giving up.
        best: Box<SolveReport>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("continuation stage {stage} (epsilon {epsilon:.3e}) failed: {source}")]
    Stage {
        stage: usize,
        epsilon: f64,
        source: Box<Error>,
    },

    #[error("flow step {step} failed: {source}")]
    Flow {
        step: usize,
        /// Trajectory recorded up to the failing step.
        partial: Box<FlowTrajectory>,
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True when the failure is a solver non-convergence, possibly wrapped in
    /// a continuation stage or a flow step.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::Stage { source, .. } | Error::Flow { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
