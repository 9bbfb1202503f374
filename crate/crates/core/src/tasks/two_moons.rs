use std::f64::consts::{FRAC_PI_2, SQRT_2};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::{Task, UniformBox};
use crate::error::Result;

const RADIUS_MEAN: f64 = 0.1;
const RADIUS_SD: f64 = 0.01;
const SHIFT: f64 = 0.25;

/// Crescent-shaped pushforward with a sign ambiguity in `theta_1 + theta_2`.
#[derive(Debug, Clone)]
pub struct TwoMoonsTask {
    prior: UniformBox,
    observed: Vec<f64>,
}

impl Default for TwoMoonsTask {
    fn default() -> Self {
        Self::new()
    }
}

impl TwoMoonsTask {
    pub fn new() -> Self {
        TwoMoonsTask {
            prior: UniformBox {
                lo: -10.0,
                hi: 10.0,
                dim: 2,
            },
            observed: vec![0.0, 0.0],
        }
    }
}

impl Task for TwoMoonsTask {
    fn name(&self) -> &str {
        "two_moons"
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
        let alpha = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let r = Normal::new(RADIUS_MEAN, RADIUS_SD).expect("valid sd").sample(rng);
        let sum = theta[0] + theta[1];
        Ok(vec![
            r * alpha.cos() + SHIFT - sum.abs() / SQRT_2,
            r * alpha.sin() - sum / SQRT_2,
        ])
    }

    fn summaries(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn observed(&self) -> &[f64] {
        &self.observed
    }
}
