use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used by tensors, embeddings and models.
///
/// Implemented for `f32` and `f64` only.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts from `f64`, rounding when the target is narrower.
    fn of(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half<T: Scalar>() -> T {
        T::of(0.5)
    }

    #[test]
    fn conversions_round_trip() {
        assert_eq!(half::<f32>(), 0.5f32);
        assert_eq!(half::<f64>(), 0.5f64);
        assert_eq!(f32::of_usize(3).to_f64_lossy(), 3.0);
    }
}
