use std::fmt::Debug;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;
use rustfft::FftNum;

/// Floating-point element type of the enhancement network.
///
/// Training runs in `f32`; gradient verification runs the same code in `f64`.
pub trait Scalar: Float + FftNum + LinalgScalar + ScalarOperand + Default + Debug + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
