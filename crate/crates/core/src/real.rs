//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::str::FromStr;

use ndarray::LinalgScalar;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + FromStr<Err = ParseFloatError>
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count or index.
    #[inline]
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    /// Hyperbolic tangent from a single exponential, several times cheaper
    /// than the libm routine. The absolute error stays within a few ulps of
    /// one; relative accuracy is not kept for tiny arguments, which does not
    /// matter for an activation whose output feeds affine layers.
    #[inline]
    fn tanh_fast(self) -> Self {
        let two = Self::one() + Self::one();
        Self::one() - two / ((two * self).exp() + Self::one())
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tanh_fast_edge_cases() {
        assert_eq!(0.0f64.tanh_fast(), 0.0);
        assert_eq!(800.0f64.tanh_fast(), 1.0);
        assert_eq!((-800.0f64).tanh_fast(), -1.0);
        assert!(f64::NAN.tanh_fast().is_nan());
        assert!((0.3f32.tanh_fast() - 0.3f32.tanh()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn tanh_fast_tracks_libm(x in -40.0f64..40.0) {
            let err = (x.tanh_fast() - x.tanh()).abs();
            prop_assert!(err <= 4.0 * f64::EPSILON, "{x}: {err:e}");
        }

        #[test]
        fn tanh_fast_near_zero(x in -1e-3f64..1e-3) {
            prop_assert!((x.tanh_fast() - x.tanh()).abs() <= 2.0 * f64::EPSILON);
        }
    }
}
