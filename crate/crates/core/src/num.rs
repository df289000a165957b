//! Scalar abstraction shared by the geometric and Fisher-information kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, NumCast};

/// Floating-point scalar usable by the channel and Fisher kernels (`f32`, `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + NumAssign + Sum + Copy + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only if the target cannot represent finite `f64`s.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    #[inline]
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Casts between scalar types through `f64`.
#[inline]
pub fn cast<T: Real, U: Real>(v: T) -> U {
    U::lit(v.to_f64_lossy())
}
