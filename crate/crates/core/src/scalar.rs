//! Floating point abstraction shared by the numerical layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the integrators, quadrature and finite-volume code are written against.
///
/// Implemented for `f32` and `f64`. Tolerances are expressed in `f64` and converted with
/// [`lit`]; on `f32` the iterative routines stop at the type's resolution instead.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into the working scalar.
#[inline]
pub fn lit<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("constant representable in scalar type")
}

/// Sign function with `sgn(0) = 0`.
#[inline]
pub fn sgn<F: Scalar>(v: F) -> F {
    if v > F::zero() {
        F::one()
    } else if v < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}
