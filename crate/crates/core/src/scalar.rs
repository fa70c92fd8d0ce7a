//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating point type the spectrum, linear algebra, perturbation and
/// bound routines are generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value representable in scalar type")
    }

    /// Converts a count (sample size, dimension) into this scalar type.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `a <= b` up to a relative slack, used when checking inequalities that hold
/// exactly in real arithmetic but are evaluated in floating point.
pub(crate) fn le_with_slack<T: Scalar>(a: T, b: T, rel: T) -> bool {
    a <= b + rel * (a.abs().max(b.abs())) + T::min_positive_value()
}

/// Relative slack for inequality flags: `1e-10`, or `1e3 * epsilon` for
/// scalar types too coarse for that.
pub(crate) fn inequality_slack<T: Scalar>() -> T {
    T::lit(1e-10).max(T::lit(1e3) * T::epsilon())
}
