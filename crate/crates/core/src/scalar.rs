//! Scalar abstraction for the closed-form physics (path loss, queueing,
//! device power). The optimizer itself runs on `f64`.

use std::fmt::{Debug, Display};

pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`. Every `Scalar` can represent an
/// `f64` approximately, so this never fails for finite input.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite literal")
}

#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
