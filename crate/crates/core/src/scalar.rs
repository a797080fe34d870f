//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar the solver is generic over.
///
/// Combines the `num-traits` float surface (arithmetic, transcendentals,
/// constants) with the linear-algebra backend's real-field requirements, so
/// one bound works for element kernels and sparse solves alike. Implemented
/// for `f32` and `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + faer::traits::RealField
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand conversion from an `f64` literal or table entry.
    fn of(v: f64) -> Self;

    /// Lossy widening to `f64` for reporting and file output.
    fn to_f64_lossy(self) -> f64;

    /// Half, spelled once.
    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }
}
