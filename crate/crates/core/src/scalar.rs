//! Scalar abstraction for the lift arithmetic.
//!
//! Everything that only needs field operations and the elementary functions
//! (lifts, the closed-form zoo, rotation estimates, winding numbers) is written
//! against [`Scalar`]. The set-oriented engine and the serialized artifacts are
//! pinned to `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Default equivariance tolerance for closed-form maps at this precision.
    fn closed_form_tol() -> Self;
}

impl Scalar for f32 {
    fn closed_form_tol() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn closed_form_tol() -> Self {
        1e-9
    }
}
