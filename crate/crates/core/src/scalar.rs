use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustdct::DctNum;

/// Floating-point sample type used throughout the crate.
///
/// Implemented for `f32` and `f64`. Sensing matrices are always drawn in
/// double precision and then converted, so the same seed produces the same
/// ensemble (up to rounding) regardless of the working precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + DctNum + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert from `f64`, rounding to the nearest representable value.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Unit roundoff of the type.
    fn unit_roundoff() -> Self {
        Self::epsilon() / Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorize the reduction
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn norm1<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |s, &v| s + v.abs())
}
