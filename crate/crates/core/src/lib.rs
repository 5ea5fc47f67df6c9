//! Multi-component Smoluchowski coagulation with a source term, on discrete
//! measures.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what the solvers and the command line
//! front-end use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coagulation;
pub mod composition;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod measures;
pub mod sampling;
pub mod scalar;
pub mod ssa;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CompositionVector = composition::Composition<f64>;
pub type WeightParams = composition::WeightParams<f64>;
pub type RegularizedWeight = composition::RegularizedWeight<f64>;
pub type SignedDiscreteMeasure = measures::SignedMeasure<f64>;
pub type KernelSpec = kernels::Kernel<f64>;
pub type OperatorOutput = coagulation::OperatorOutput<f64>;
pub type GridSpec = grid::GridSpec<f64>;
pub type GridState = grid::GridState<f64>;
pub type SourceSpec = grid::SourceSpec<f64>;
pub type Trajectory = trajectory::Trajectory<f64>;
