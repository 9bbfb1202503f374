use rand::RngCore;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{log_sum_exp, Task, UniformBox};
use crate::error::Result;

const NU: f64 = 3.0;
const SIGMA: f64 = 0.1;
const DIM_S: usize = 3;

const A1: [f64; 2] = [-0.5, 0.0];
const A2: [f64; 2] = [0.5, 0.0];
const B1: [f64; 2] = [0.0, -0.5];
const B2: [f64; 2] = [0.0, 0.5];

/// Equal mixture of two tri-variate Student-t distributions whose locations
/// are hyperbolic distance differences to two pairs of foci.
#[derive(Debug, Clone)]
pub struct HyperboloidTask {
    prior: UniformBox,
    observed: Vec<f64>,
}

impl Default for HyperboloidTask {
    fn default() -> Self {
        Self::new()
    }
}

impl HyperboloidTask {
    pub fn new() -> Self {
        HyperboloidTask {
            prior: UniformBox {
                lo: -2.0,
                hi: 2.0,
                dim: 2,
            },
            observed: vec![0.5; DIM_S],
        }
    }

    pub fn with_observation(observed: Vec<f64>) -> Self {
        assert_eq!(observed.len(), DIM_S);
        HyperboloidTask {
            observed,
            ..Self::new()
        }
    }
}

/// `| ||theta - x1|| - ||theta - x2|| |`.
pub fn focal_difference(theta: &[f64], x1: &[f64; 2], x2: &[f64; 2]) -> f64 {
    let d = |x: &[f64; 2]| ((theta[0] - x[0]).powi(2) + (theta[1] - x[1]).powi(2)).sqrt();
    (d(x1) - d(x2)).abs()
}

/// Log-density of an isotropic multivariate t with location `loc * 1`.
fn student_log_pdf(s: &[f64], loc: f64) -> f64 {
    let p = s.len() as f64;
    let q: f64 = s.iter().map(|x| ((x - loc) / SIGMA).powi(2)).sum();
    ln_gamma(0.5 * (NU + p))
        - ln_gamma(0.5 * NU)
        - 0.5 * p * (NU * std::f64::consts::PI).ln()
        - p * SIGMA.ln()
        - 0.5 * (NU + p) * (q / NU).ln_1p()
}

impl Task for HyperboloidTask {
    fn name(&self) -> &str {
        "hyperboloid"
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn dim_stats(&self) -> usize {
        DIM_S
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
        use rand::Rng;
        let loc = if rng.random::<bool>() {
            focal_difference(theta, &A1, &A2)
        } else {
            focal_difference(theta, &B1, &B2)
        };
        // t = z / sqrt(chi2 / nu), shared mixing variable across coordinates
        let chi2: f64 = ChiSquared::new(NU).expect("valid dof").sample(rng);
        let scale = SIGMA * (NU / chi2).sqrt();
        Ok((0..DIM_S)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                loc + scale * z
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
        let a = student_log_pdf(&self.observed, focal_difference(theta, &A1, &A2));
        let b = student_log_pdf(&self.observed, focal_difference(theta, &B1, &B2));
        Some(log_sum_exp(a, b) - std::f64::consts::LN_2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn focal_difference_examples() {
        assert_eq!(focal_difference(&A1, &A1, &A2), 1.0);
        assert_eq!(focal_difference(&[0.0, 0.0], &A1, &A2), 0.0);
        assert_eq!(focal_difference(&[0.0, 0.0], &B1, &B2), 0.0);
    }

    #[test]
    fn dimensions() {
        let t = HyperboloidTask::new();
        assert_eq!((t.dim_theta(), t.dim_stats()), (2, 3));
    }

    #[test]
    fn origin_puts_both_components_at_zero() {
        let t = HyperboloidTask::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| t.simulate(&[0.0, 0.0], &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        // t_3 with scale 0.1 has sd 0.1 * sqrt(3)
        assert!(mean.abs() < 4.0 * 0.1 * 3f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn student_density_integrates_to_one() {
        // midpoint rule over a cube of +-25 scale units
        let h = 0.02;
        let r = 2.5;
        let k = (2.0 * r / h) as i64;
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let p = [
                        -r + (i as f64 + 0.5) * h,
                        -r + (j as f64 + 0.5) * h,
                        -r + (l as f64 + 0.5) * h,
                    ];
                    total += student_log_pdf(&p, 0.0).exp() * h * h * h;
                }
            }
        }
        // heavy tails leave a little mass outside the cube
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }
}
