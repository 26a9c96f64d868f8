//! Scalar abstraction for the numeric core.
//!
//! All geometry, modeling, and inversion code is generic over [`Real`], so the
//! whole pipeline can be instantiated with `f32` or `f64`. The shipped CLI and
//! the acceptance tolerances use `f64`.

use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric core is generic over: `f32` or `f64`.
pub trait Real: Copy + nalgebra::RealField + FloatConst + FromPrimitive + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(value: f64) -> T {
    T::from_f64(value).expect("constant not representable in scalar type")
}

/// Converts a `usize` count into the working scalar type.
#[inline]
pub fn real_usize<T: Real>(value: usize) -> T {
    T::from_usize(value).expect("count not representable in scalar type")
}
