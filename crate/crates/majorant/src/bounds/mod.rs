//! Guaranteed two-sided bounds for the energy-norm error: the conforming
//! majorant/minorant pair, and their extension to flux approximations that
//! are only square integrable.

pub mod conforming;
pub mod nonconforming;

use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum BoundsError<S: Real> {
    #[error(transparent)]
    Assemble(#[from] crate::fem::AssembleError),
    #[error(transparent)]
    Constraint(#[from] crate::fem::ConstraintError<S>),
    #[error(transparent)]
    Solve(#[from] crate::fem::SolveError<S>),
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
    #[error("{0}")]
    Usage(String),
}
