//! Solve results.

use crate::expr::{LinExpr, VarId};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal values indexed by `VarId`.
    pub values: Vec<f64>,
    /// Objective in the program's own sense (maximization objectives are
    /// reported as maximized values).
    pub objective: f64,
    pub iterations: u32,
    pub residual_primal: f64,
    pub residual_dual: f64,
}

impl ConicSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    pub fn expr_value(&self, e: &LinExpr) -> f64 {
        e.eval(&self.values)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Program(#[from] crate::program::ProgramError),
    #[error("no solver backend named `{0}` is registered")]
    UnknownBackend(String),
    #[error("solver backend failed: {0}")]
    Backend(String),
}
