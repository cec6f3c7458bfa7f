use thiserror::Error;

use crate::multigrid::SolveReport;

/// Cell coordinates `(i, j)` on the grid level where a failure was detected.
pub type CellIndex = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonphysical state{}: rho = {rho:e}, theta = {theta:e}", fmt_cell(.cell))]
    NonphysicalState {
        cell: Option<CellIndex>,
        rho: f64,
        theta: f64,
    },

    #[error("Grad constraints violated: |f_e| = {first_order:e}, |trace f_2e| = {trace:e}")]
    NotGradNormalized { first_order: f64, trace: f64 },

    #[error("ES-BGK tensor is not positive definite (smallest eigenvalue {eigenvalue:e})")]
    NonSpd { eigenvalue: f64 },

    #[error("nonphysical wall density {density:e} on the {side} wall")]
    NonphysicalWall { side: &'static str, density: f64 },

    #[error("reconstructed face temperature {theta:e} is nonpositive at cell ({}, {})", .cell.0, .cell.1)]
    NonphysicalReconstruction { cell: CellIndex, theta: f64 },

    #[error("no convergence after {iterations} iterations (relative residual {ratio:e})")]
    NonConvergence {
        iterations: usize,
        ratio: f64,
        report: Box<SolveReport>,
    },

    #[error("iteration diverged at step {iterations} (relative residual {ratio:e})")]
    Divergence {
        iterations: usize,
        ratio: f64,
        report: Box<SolveReport>,
    },

    #[error("solver failed at step {iterations}: {source}")]
    Aborted {
        iterations: usize,
        source: Box<Error>,
        report: Box<SolveReport>,
    },

    #[error("multigrid level {level}: {source}")]
    Level { level: usize, source: Box<Error> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_cell(cell: &Option<CellIndex>) -> String {
    match cell {
        Some((i, j)) => format!(" at cell ({i}, {j})"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a cell index to a state error raised by a cell-local routine.
    pub fn at_cell(self, i: usize, j: usize) -> Self {
        match self {
            Error::NonphysicalState { rho, theta, .. } => Error::NonphysicalState {
                cell: Some((i, j)),
                rho,
                theta,
            },
            other => other,
        }
    }

    /// The partial report carried by iteration failures, if any.
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            Error::NonConvergence { report, .. }
            | Error::Divergence { report, .. }
            | Error::Aborted { report, .. } => Some(report),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
