//! Floating-point abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Scalar trait for all numeric code in this crate.
///
/// A thin extension of [`num_traits::Float`] with the assignment operators
/// and conversions the integrators and solvers need. Implemented for `f32`
/// and `f64`; simulations and certificates are generic so the whole pipeline
/// can be instantiated at either precision (the CLI uses `f64`).
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumCast
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + 'static
{
    /// Lossy conversion from `f64`, for literals and configuration values.
    #[inline]
    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    /// Exact conversion from a small integer.
    #[inline]
    fn from_usize(v: usize) -> Self {
        <Self as num_traits::NumCast>::from(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}
