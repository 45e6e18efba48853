//! Scalar abstraction for the numeric kernels.
//!
//! The math-heavy parts of the crate (CPPN evaluation, Elman forward pass,
//! CMA-ES, novelty, planar geometry) are generic over [`Real`] so they work
//! with `f32` or `f64`. The experiment pipeline pins everything to `f64`
//! through the aliases at the crate root; the acceptance tolerances assume it.

use rand::distributions::uniform::SampleUniform;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + SampleUniform
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    /// Lossy conversion to `f64`, for reporting.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sample standard deviation (n-1 denominator) of a slice; 0 for fewer than two values.
pub fn sample_stddev<S: Real>(values: &[S]) -> S {
    if values.len() < 2 {
        return S::zero();
    }
    let n = S::of(values.len() as f64);
    let mean = values.iter().copied().sum::<S>() / n;
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<S>()
        / (n - S::one());
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stddev_matches_hand_computation() {
        // {2, 4, 4, 4, 5, 5, 7, 9}: mean 5, sum of squared deviations 32, var 32/7
        let vals: Vec<f64> = vec![2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let expect = (32.0f64 / 7.0).sqrt();
        assert!((sample_stddev(&vals) - expect).abs() < 1e-15);
    }

    #[test]
    fn stddev_degenerate_cases() {
        assert_eq!(sample_stddev::<f64>(&[]), 0.0);
        assert_eq!(sample_stddev(&[3.0f64]), 0.0);
        assert_eq!(sample_stddev(&[1.0f64; 20]), 0.0);
    }

    #[test]
    fn works_at_f32() {
        let vals: Vec<f32> = vec![1.0, 2.0, 3.0];
        assert!((sample_stddev(&vals) - 1.0).abs() < 1e-6);
    }
}
