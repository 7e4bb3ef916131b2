//! The scalar type stored in grids and volumes.

use num_traits::{Float, NumAssign};

/// Floating-point field value: f32 or f64.
///
/// Grid cells and voxel payloads are generic over this trait so the same
/// pipeline can run with single-precision storage (the file formats' value
/// type) or double precision. World-space transforms are always f64
/// regardless of the stored scalar.
pub trait Scalar:
    Float + NumAssign + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
