//! Generic scalar abstraction.
//!
//! All floating-point math in this crate is written against [`Real`], a
//! bundle of `num-traits` capabilities implemented for `f32` and `f64`.
//! Exact quantities (lattice coordinates, codeword lengths, Monte Carlo
//! tallies) use integers and are not abstracted.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert a finite `f64` into `F`, rounding if `F` is narrower.
#[inline]
pub fn cast<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("finite f64 converts to Real")
}

/// Convert a `usize` into `F`.
#[inline]
pub fn cast_usize<F: Real>(n: usize) -> F {
    F::from_usize(n).expect("usize converts to Real")
}

/// Convert an `i64` into `F`.
#[inline]
pub fn cast_i64<F: Real>(n: i64) -> F {
    F::from_i64(n).expect("i64 converts to Real")
}

/// Convert a `u64` into `F`.
#[inline]
pub fn cast_u64<F: Real>(n: u64) -> F {
    F::from_u64(n).expect("u64 converts to Real")
}
