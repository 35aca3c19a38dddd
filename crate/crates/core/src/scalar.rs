//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance on the unit-mass check of a grid density.
    fn mass_tol() -> Self {
        Self::c(1e-8).max(Self::epsilon() * Self::c(1e3))
    }

    /// Loosens an absolute tolerance tuned for `f64` to what the type can resolve.
    fn tol(t: f64) -> Self {
        Self::c(t).max(Self::epsilon() * Self::c(64.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
