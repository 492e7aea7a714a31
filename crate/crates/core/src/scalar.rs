use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

use crate::double_double::DoubleDouble;

/// Real scalar the analytic layer and the grid oracle are generic over.
///
/// Implemented for `f32`, `f64` and [`DoubleDouble`].
pub trait Scalar: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal or parameter.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    /// Exact for integers below 2^53 (2^24 for `f32`).
    fn of_u64(v: u64) -> Self {
        Self::from_u64(v).expect("u64 is representable in every Scalar")
    }

    fn of_i64(v: i64) -> Self {
        Self::from_i64(v).expect("i64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for DoubleDouble {}
