//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerical core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `F`.
#[inline]
pub fn lit<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Converts a `usize` count into `F`.
#[inline]
pub fn count<F: Scalar>(n: usize) -> F {
    F::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<F: Scalar>(v: F) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn mean<F: Scalar>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    values.iter().copied().sum::<F>() / count(values.len())
}
