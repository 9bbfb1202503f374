//! Simulator bundles: prior, forward model, summaries and distances.

mod distractors;
mod gmm;
mod hyperboloid;
pub mod ode;
mod sir;
mod two_moons;

use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Result, SabcError};

pub use distractors::DistractorTask;
pub use gmm::GmmTask;
pub use hyperboloid::HyperboloidTask;
pub use sir::SirTask;
pub use two_moons::TwoMoonsTask;

/// Names accepted by [`task_by_name`].
pub const TASK_NAMES: [&str; 5] = ["hyperboloid", "gmm", "distractors", "two_moons", "sir"];

/// A likelihood-free inference problem.
///
/// Implementations are stateless given the random stream passed in, so one
/// task can be shared by all workers.
pub trait Task: Send + Sync {
    fn name(&self) -> &str;

    fn dim_theta(&self) -> usize;

    fn dim_stats(&self) -> usize;

    fn prior_sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// `-inf` outside the prior support.
    fn prior_log_density(&self, theta: &[f64]) -> f64;

    /// Per-coordinate bounds of the prior support (possibly infinite).
    fn prior_support(&self) -> Vec<(f64, f64)>;

    /// Raw model output for parameters `theta`.
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    /// Summary statistics of a raw output.
    fn summaries(&self, x: &[f64]) -> Vec<f64>;

    /// Observed summary statistics.
    fn observed(&self) -> &[f64];

    /// Generating parameters of the observation, when it is synthetic.
    fn true_theta(&self) -> Option<&[f64]> {
        None
    }

    /// Per-statistic distances to the observation.
    fn distances(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(self.observed()).map(|(a, b)| (a - b).abs()).collect()
    }

    /// Exact log-likelihood of the observation, for tasks where it is
    /// tractable. Only the reference-posterior machinery uses it.
    fn log_likelihood(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// Convenience: simulate, summarize and measure in one go.
    fn simulate_distances(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let x = self.simulate(theta, rng)?;
        Ok(self.distances(&self.summaries(&x)))
    }
}

/// Looks up one of the built-in benchmark tasks.
pub fn task_by_name(name: &str) -> Result<Arc<dyn Task>> {
    Ok(match name {
        "hyperboloid" => Arc::new(HyperboloidTask::new()),
        "gmm" => Arc::new(GmmTask::new()),
        "distractors" => Arc::new(DistractorTask::new()),
        "two_moons" => Arc::new(TwoMoonsTask::new()),
        "sir" => Arc::new(SirTask::new()?),
        other => return Err(SabcError::UnknownTask(other.to_string())),
    })
}

/// Axis-aligned uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    pub lo: f64,
    pub hi: f64,
    pub dim: usize,
}

impl UniformBox {
    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(self.lo..self.hi)).collect()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() == self.dim && theta.iter().all(|&t| t >= self.lo && t <= self.hi) {
            -(self.dim as f64) * (self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn support(&self) -> Vec<(f64, f64)> {
        vec![(self.lo, self.hi); self.dim]
    }
}

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `N(mean, sd^2)` at `x`.
pub(crate) fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
