//! Reference-domain finite element solver for an optimal control problem
//! whose state is a membrane-type free boundary `x2 = 1 + gamma(x1)` over
//! a harmonic bulk field.
//!
//! The physical domain is pulled back to the unit square, which turns the
//! unknown geometry into the coefficient `A[gamma]` of a fixed-domain
//! elliptic problem. On top of that sit the fixed-point state solver, its
//! first and second derivatives, the adjoint, a projected-gradient
//! optimizer and the bookkeeping of every constant the well-posedness
//! theory depends on.
//!
//! All numerics are generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`.

pub mod adjoint;
pub mod coeffs;
pub mod constants;
pub mod control;
pub mod error;
pub mod expr;
pub mod femcore;
pub mod io;
pub mod scalar;
pub mod state;
pub mod tangent;

pub use error::{FbpError, Result};

pub type BoundaryCurve = femcore::BoundaryCurve<f64>;
pub type ControlProfile = femcore::ControlProfile<f64>;
pub type BulkField = femcore::BulkField<f64>;
pub type StatePair = state::StatePair<f64>;
pub type StateProblem = state::StateProblem<f64>;
pub type ControlProblem = control::ControlProblem<f64>;
pub type AdjointPair = adjoint::AdjointPair<f64>;
pub type CoeffPoint = coeffs::CoeffPoint<f64>;
pub type Matrix2 = coeffs::Matrix2<f64>;
