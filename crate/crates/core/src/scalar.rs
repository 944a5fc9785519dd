//! Scalar abstraction: the numeric kernels are generic over the float type.

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar usable throughout the library (f32 or f64).
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + ScalarOperand + Debug + Display + Send + Sync + 'static
{
    /// Total order on raw values (IEEE totalOrder), used to canonicalize
    /// reduction sequences.
    fn total_order(&self, other: &Self) -> std::cmp::Ordering {
        self.to_f64()
            .unwrap_or(f64::NAN)
            .total_cmp(&other.to_f64().unwrap_or(f64::NAN))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for lifting an f64 constant into the working scalar type.
#[inline]
pub fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant representable in scalar type")
}
