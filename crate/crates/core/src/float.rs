//! Scalar abstraction: the whole engine is generic over the working
//! floating-point type.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Real scalar used throughout the engine: `f32` or `f64`.
///
/// Extends [`nalgebra::RealField`] with infinity sentinels and cheap
/// conversions to and from `f64` (used for literals and diagnostics).
pub trait Float: RealField + FromPrimitive + Copy {
    const INFINITY: Self;
    const NEG_INFINITY: Self;

    /// Convert an `f64` literal into this scalar type.
    fn of(v: f64) -> Self;

    /// Widen to `f64` for diagnostics and report formatting.
    fn to_f64(self) -> f64;
}

macro_rules! impl_float {
    ($t:ty) => {
        impl Float for $t {
            const INFINITY: Self = <$t>::INFINITY;
            const NEG_INFINITY: Self = <$t>::NEG_INFINITY;

            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);
