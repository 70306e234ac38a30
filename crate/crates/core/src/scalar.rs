//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for coordinates, strengths and log-weights.
///
/// Implemented for `f32` and `f64`. Random draws and the log-gamma function are
/// evaluated in `f64` and narrowed, so `f32` trades precision for memory only.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite input on `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance over the shared prefix of two coordinate slices.
#[inline]
pub fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Squared distance in the ground plane (first two coordinates).
#[inline]
pub fn planar_dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    dist2(&a[..2.min(a.len())], &b[..2.min(b.len())])
}

/// `ln Σ exp(x_i)` without overflow. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1f64, -2.0, 3.5];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs.iter().copied()) - direct).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let xs = [-1000.0f64, -1000.0];
        let v = log_sum_exp(xs.iter().copied());
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }

    #[test]
    fn planar_distance_ignores_elevation() {
        assert_eq!(planar_dist2(&[0.0f32, 0.0, 5.0], &[3.0, 4.0, -7.0]), 25.0);
        assert_eq!(dist2(&[0.0f64, 0.0, 0.0], &[1.0, 2.0, 2.0]), 9.0);
    }
}
