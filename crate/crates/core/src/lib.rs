//! Exact discrete optimal transport for the distance cost, with the
//! second-variational selection that picks a map out of the (usually
//! degenerate) set of optimal plans.
//!
//! The crate is `no_std` + `alloc`. Everything here is pure: given the same
//! inputs (and seed, where sampling is involved) every function returns the
//! same output.
//!
//! Layout:
//!
//! - [`gaussian`]: diagonal Gaussian covariances with polynomial decay,
//!   sampling and grid discretization.
//! - [`measure`]: atom and grid measures, coordinate projections.
//! - [`cost`]: the distance cost, the strictly convex `alpha` cost, the
//!   perturbed cost `|z| + eps * alpha(z)` and the face-restricted cost.
//! - [`transport`]: network simplex solver, dual potentials, optimal face
//!   dimension.
//! - [`selection`]: epsilon ladders and the two-stage lexicographic oracle.
//! - [`interpolation`] and [`entropy`]: displacement interpolation, grid
//!   relative entropy and the convexity inequalities along the path.
//! - [`support`]: cyclical monotonicity, potentials, graph-ness and the
//!   inverse-image ratio estimator.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cost;
pub mod entropy;
mod error;
pub mod gaussian;
pub mod interpolation;
pub mod math;
pub mod measure;
pub mod selection;
pub mod support;
pub mod transport;

pub use cost::CostSpec;
pub use error::{Error, Result};
pub use gaussian::{CovarianceMode, CovarianceSpec, TruncatedGaussian};
pub use measure::{AtomMeasure, DiscreteMeasure, Grid, GridMeasure, Point};
pub use transport::{KantorovichPotential, PlanEntry, Solution, TransportPlan};
