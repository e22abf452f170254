use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solver is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Relative tolerance: the requested value, floored at a small multiple
    /// of machine epsilon so that `f32` stays attainable.
    fn rel_tol(requested: f64) -> Self {
        let floor = Self::epsilon() * lit::<Self>(64.0);
        lit::<Self>(requested).max(floor)
    }

    /// Number of halvings that shrinks a unit interval below machine epsilon.
    fn mantissa_levels() -> usize {
        let eps = Self::epsilon().to_f64().unwrap_or(f64::EPSILON);
        (-eps.log2()).ceil() as usize + 1
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion used for error payloads and reports.
#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("integer representable in scalar type")
}
