//! Solver-agnostic conic intermediate representation: real scalar variables,
//! a linear objective, and labelled affine / second-order / rotated
//! second-order / PSD cone constraints, plus the complex-to-real embedding
//! used to model complex beamforming variables.
//!
//! Programs are solved through a [`backend::SolverBackend`] registry; the
//! built-in backend lowers to Clarabel.

mod expr;
mod program;
mod solution;
pub mod backend;
pub mod clarabel_backend;
pub mod complex;

pub use backend::{BackendRegistry, SolverBackend};
pub use expr::{LinExpr, VarId};
pub use program::{ConicProgram, Constraint, ConstraintKind, ProgramError, Sense};
pub use solution::{ConicSolution, SolveError, SolveStatus};
