//! Mollified Newton solvers for linear-growth variational problems with
//! `L^2` fidelity, together with BV tools, minimizing-movement flows and
//! numerical checks of the associated a priori estimates.

pub mod discretize;
pub mod error;
pub mod flow;
pub mod bvtools;
pub mod datum;
pub mod geometry;
pub mod integrand;
pub mod kernel;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod solver;
pub mod syntax;
pub mod verify;

pub use error::{Error, Result};
