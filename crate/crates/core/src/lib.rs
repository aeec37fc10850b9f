//! Dynamics of annulus homeomorphisms through their lifts to the strip.
//!
//! Maps are lifts `f~` on `R x I` commuting with `T(x, y) = (x + 1, y)`.
//! On top of that sit rotation estimates, set-oriented box computations
//! (windows, attractors, chain recurrence, returning disks), fixed point
//! search with indices, a triple horseshoe, and certificates that replay
//! every finding without repeating the search.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// 0.318 is a map parameter, not 1/pi.
#![allow(clippy::approx_constant)]

pub mod billiards;
pub mod boxdyn;
pub mod certificate;
pub mod error;
pub mod fixedpoint;
pub mod horseshoe;
pub mod lift;
pub mod rotation;
pub mod scalar;
mod serde_float;
pub mod zoo;

pub use error::{Error, Result};
pub use lift::{AnnulusPoint, ChartKind, ChartSpec, Exactness, LiftMap, LiftPoint};
pub use scalar::Scalar;
pub use zoo::{build, make_map, make_map_f64, MapSpec, MapVariant};

/// Double precision point of the strip.
pub type Point = LiftPoint<f64>;
/// Type-erased double precision map.
pub type DynMap = Box<dyn LiftMap<f64>>;
pub type Estimate = rotation::RotationEstimate<f64>;
