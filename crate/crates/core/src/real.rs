//! Scalar abstraction: everything numeric in this crate is generic over a
//! floating-point type implementing [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant into `Self`.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    /// Lift a `usize` into `Self`.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }

    /// Lower to `f64` (widening for `f32`, identity for `f64`).
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::NumCast::from(self).expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x^(-e)` with a fast path for half-integer exponents.
///
/// Kernel evaluation sits in the innermost quadrature loops; for the
/// prototype kernels the exponent `mn - alpha` is frequently a multiple of
/// 1/2, where `sqrt` plus integer powers beat `powf` by an order of
/// magnitude.
#[inline]
pub fn inv_pow<T: Real>(x: T, e: T) -> T {
    let twice = e + e;
    let k = twice.round();
    if (twice - k).abs() < T::c(1e-12) {
        let k = k.as_f64() as i64;
        // x^(-k/2)
        let half = if k % 2 != 0 { x.sqrt() } else { T::one() };
        let whole = x.powi((k / 2) as i32);
        (whole * half).recip()
    } else {
        x.powf(-e)
    }
}
