//! Weight normalization, effective sample size and systematic resampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

/// Normalizes log-weights; `None` when no weight is positive and finite.
pub fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let max = log_w.iter().copied().filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_w
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / total).collect())
}

/// `1 / sum w^2` for normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling of `n` indices from normalized `weights`.
///
/// The returned indices are non-decreasing.
pub fn systematic_resample(weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let offset: f64 = rng.random::<f64>();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = 0.0;
    let mut i = 0;
    let last = weights.len() - 1;
    for k in 0..n {
        let target = (k as f64 + offset) / n as f64;
        while i < last && cumulative + weights[i] <= target {
            cumulative += weights[i];
            i += 1;
        }
        out.push(i);
    }
    out
}

/// Weighted covariance of row vectors (weights need not be normalized).
pub fn weighted_covariance(points: &[Vec<f64>], weights: &[f64]) -> DMatrix<f64> {
    let d = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(d);
    for (p, &w) in points.iter().zip(weights) {
        mean += DVector::from_column_slice(p) * (w / total);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        if w > 0.0 {
            let c = DVector::from_column_slice(p) - &mean;
            cov += &c * c.transpose() * (w / total);
        }
    }
    cov
}

/// Unbiased sample covariance of row vectors.
pub fn sample_covariance(points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len() as f64;
    weighted_covariance(points, &vec![1.0; points.len()]) * (n / (n - 1.0))
}
