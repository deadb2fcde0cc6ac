use thiserror::Error;

use crate::solvers::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("entry ({row}, {col}) is outside the sparsity pattern")]
    OutsidePattern { row: usize, col: usize },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    /// The iteration budget ran out. Carries the best iterate and its report.
    #[error(
        "{} did not converge after {} iterations (residual {:.3e} > {:.3e})",
        .0.report.method,
        .0.report.iterations,
        .0.report.final_residual(),
        .0.report.tolerance
    )]
    NotConverged(Box<Solution>),

    /// A conjugate-gradient curvature term was non-positive: the matrix is not SPD.
    #[error("solver breakdown at iteration {iteration}: p'Mp = {curvature:.3e} (matrix not positive definite?)")]
    BreakdownDetected { iteration: usize, curvature: f64 },

    #[error("{stage} solve failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("label {label} out of range for {labels} labels")]
    LabelOutOfRange { label: usize, labels: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solver failure at training step {step}: {source}")]
    SolverFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifies which of the two reduced solves of the shared-pairwise path failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Solve for the sum over classes.
    ClassSum,
    /// Per-class solve for class `k` (0-based).
    Class(usize),
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::ClassSum => write!(f, "class-sum"),
            Stage::Class(k) => write!(f, "class {k}"),
        }
    }
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
