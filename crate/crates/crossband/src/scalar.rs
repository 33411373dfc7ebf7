//! Floating-point scalar abstraction.
//!
//! The network and tensor code is generic over the scalar type: `f32` for
//! training, `f64` for gradient verification. Concrete aliases live at the
//! crate root.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar type the numeric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Copy + Send + Sync + std::fmt::Debug + 'static
{
    /// Lossless-enough conversion from `f64` (lossy for `f32`, exact for `f64`).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }

    /// Widening conversion to `f64`.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
