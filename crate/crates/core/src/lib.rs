//! Reflected diffusions with boundary local time, Neumann heat semigroups
//! on flat domains, and numerical checks of curvature / second
//! fundamental form inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod pde;
pub mod point;
pub mod sde;
pub mod selftest;
pub mod semigroup;
pub mod stats;

pub use checks::{InequalityReport, StatementId, Verdict};
pub use error::{Error, Result};
pub use geometry::{CurvatureBounds, DriftSpec, ManifoldModel, Potential, ScalarField, Shape};
pub use point::{Point, Sym2};
pub use sde::{PathSample, SimParams};
pub use semigroup::{EstimateWithError, Terminal, TestFunction, TimeIntegral, WeightedFunctional};
