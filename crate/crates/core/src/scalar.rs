//! Floating-point abstraction shared by the network and the loss functions.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the recurrent network and loss functions are generic over.
///
/// Implemented for `f32` and `f64`. The training pipeline always runs in
/// `f64`; `f32` is available for inference-only use where the tolerance of
/// gradient checks does not matter.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and hyperparameters.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    #[inline]
    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint() {
        assert_eq!(0.0f64.sigmoid(), 0.5);
        assert_eq!(0.0f32.sigmoid(), 0.5);
    }

    #[test]
    fn conversions() {
        assert_eq!(<f32 as Scalar>::of(0.25), 0.25f32);
        assert_eq!(Scalar::as_f64(1.5f32), 1.5);
    }
}
