//! Generic real scalar trait tying together the numeric bounds the kernels
//! need, implemented for `f32` and `f64`.

use num_traits::{Float, FloatConst, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftNum;

/// Real scalar type for all computational kernels.
///
/// Combines floating-point arithmetic, FFT support, and standard-normal
/// sampling so that every module can stay agnostic of the concrete precision.
pub trait Scalar: Float + FloatConst + NumAssign + FftNum + std::iter::Sum<Self> {
    /// Draw one sample from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from `f64`; panics only for non-finite overflow,
    /// which no caller produces.
    fn of_f64(x: f64) -> Self {
        num_traits::NumCast::from(x).expect("f64 value representable in scalar type")
    }

    /// Exact-for-small-values conversion from `usize`.
    fn of_usize(x: usize) -> Self {
        num_traits::NumCast::from(x).expect("usize value representable in scalar type")
    }
}

impl Scalar for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}
