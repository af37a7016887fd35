//! Guaranteed, computable upper and lower bounds for the energy-norm error of
//! approximate solutions to elliptic Dirichlet problems on 3D exterior domains.
//!
//! The computational domain is one octant of a truncated exterior domain
//! (outside a unit ball or a unit cube, inside an artificial sphere of radius
//! `R`). Outside the sphere the approximation is the harmonic tail `zeta / r`.
//! The crate provides
//!
//! * structured tetrahedral mesh generators and a plain-text mesh format
//!   ([`mesh`]),
//! * nodal P1/P2 finite element spaces, quadrature, sparse assembly and a
//!   preconditioned conjugate gradient solver ([`fem`]),
//! * weighted norms, problem data and closed-form reference solutions
//!   ([`problem`]),
//! * the truncated-domain energy minimization producing the approximation and
//!   its tail amplitude ([`truncation`]),
//! * two-sided error bounds for conforming approximations and for merely
//!   square-integrable flux approximations ([`bounds`]),
//! * CSV/VTK report emission ([`report`]).
//!
//! All numerics are generic over the scalar type through [`Real`]; the `*64`
//! aliases fix `f64`, which is what the command line driver uses.

pub mod bounds;
pub mod fem;
pub mod fields;
pub mod mesh;
pub mod problem;
pub mod report;
pub mod truncation;

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Scalar type the numerics are generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssignOps + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Shorthand for converting an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssignOps
        + Debug
        + Display
        + FromStr
        + Default
        + Send
        + Sync
        + 'static
{
}

pub type TetMesh64 = mesh::TetMesh<f64>;
pub type FeSpace64<'a> = fem::FeSpace<'a, f64>;
pub type ProblemSpec64 = problem::ProblemSpec<f64>;
pub type TruncatedApproximation64 = truncation::TruncatedApproximation<f64>;
pub type BoundReport64 = bounds::conforming::BoundReport<f64>;
pub type NcBoundReport64 = bounds::nonconforming::NcBoundReport<f64>;
