//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type the model is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Display + LowerExp + Debug + Default
{
    /// Default relative residual tolerance for the steady solver.
    fn solver_tolerance() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f64 {
    fn solver_tolerance() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    // A correctly rounded f32 solution of the default system leaves a
    // relative residual near 2e-4; the unrefined solve sits near 1e-3.
    fn solver_tolerance() -> Self {
        5e-4
    }
}
