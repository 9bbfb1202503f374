use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{log_sum_exp, normal_log_pdf, Task, UniformBox};
use crate::error::Result;

const NARROW_SD: f64 = 0.1;

/// Equal mixture of a broad and a narrow isotropic Gaussian, both centred at
/// the parameters.
#[derive(Debug, Clone)]
pub struct GmmTask {
    prior: UniformBox,
    observed: Vec<f64>,
}

impl Default for GmmTask {
    fn default() -> Self {
        Self::new()
    }
}

impl GmmTask {
    pub fn new() -> Self {
        Self::with_observation(vec![0.0, 0.0])
    }

    pub fn with_observation(observed: Vec<f64>) -> Self {
        assert_eq!(observed.len(), 2);
        GmmTask {
            prior: UniformBox {
                lo: -10.0,
                hi: 10.0,
                dim: 2,
            },
            observed,
        }
    }

    /// Log-density of `s` given `theta`.
    pub fn log_density(theta: &[f64], s: &[f64]) -> f64 {
        let component = |sd: f64| -> f64 {
            s.iter()
                .zip(theta)
                .map(|(&x, &m)| normal_log_pdf(x, m, sd))
                .sum()
        };
        log_sum_exp(component(1.0), component(NARROW_SD)) - std::f64::consts::LN_2
    }
}

impl Task for GmmTask {
    fn name(&self) -> &str {
        "gmm"
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn dim_stats(&self) -> usize {
        2
    }

    fn prior_sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.prior.sample(rng)
    }

    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        self.prior.log_density(theta)
    }

    fn prior_support(&self) -> Vec<(f64, f64)> {
        self.prior.support()
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let sd = if rng.random::<bool>() { 1.0 } else { NARROW_SD };
        Ok(theta
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * z
            })
            .collect())
    }

    fn summaries(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn observed(&self) -> &[f64] {
        &self.observed
    }

    fn log_likelihood(&self, theta: &[f64]) -> Option<f64> {
        Some(Self::log_density(theta, &self.observed))
    }
}
