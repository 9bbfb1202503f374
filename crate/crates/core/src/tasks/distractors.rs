use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{log_sum_exp, normal_log_pdf, Task, UniformBox};
use crate::error::Result;

const WEIGHT: f64 = 0.3;
const NARROW_SD: f64 = 0.3;
const INFORMATIVE: usize = 2;
const DISTRACTORS: usize = 9;

/// Two informative mixture statistics padded with nine pure-noise ones.
#[derive(Debug, Clone)]
pub struct DistractorTask {
    prior: UniformBox,
    observed: Vec<f64>,
}

impl Default for DistractorTask {
    fn default() -> Self {
        Self::new()
    }
}

impl DistractorTask {
    pub fn new() -> Self {
        let mut observed = vec![0.0; INFORMATIVE + DISTRACTORS];
        observed[0] = 5.0;
        observed[1] = 5.0;
        DistractorTask {
            prior: UniformBox {
                lo: -10.0,
                hi: 10.0,
                dim: 1,
            },
            observed,
        }
    }

    /// Log-density of one informative statistic.
    pub fn informative_log_pdf(s: f64, theta: f64) -> f64 {
        log_sum_exp(
            WEIGHT.ln() + normal_log_pdf(s, theta, 1.0),
            (1.0 - WEIGHT).ln() + normal_log_pdf(s, -theta, NARROW_SD),
        )
    }

    /// Number of statistics that carry information about the parameter.
    pub const fn informative_count() -> usize {
        INFORMATIVE
    }
}

impl Task for DistractorTask {
    fn name(&self) -> &str {
        "distractors"
    }

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_stats(&self) -> usize {
        INFORMATIVE + DISTRACTORS
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
        let theta = theta[0];
        let mut out = Vec::with_capacity(INFORMATIVE + DISTRACTORS);
        for _ in 0..INFORMATIVE {
            let z: f64 = StandardNormal.sample(rng);
            out.push(if rng.random::<f64>() < WEIGHT {
                theta + z
            } else {
                -theta + NARROW_SD * z
            });
        }
        for _ in 0..DISTRACTORS {
            out.push(StandardNormal.sample(rng));
        }
        Ok(out)
    }

    fn summaries(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn observed(&self) -> &[f64] {
        &self.observed
    }

    fn log_likelihood(&self, theta: &[f64]) -> Option<f64> {
        let s = &self.observed;
        let informative: f64 = s[..INFORMATIVE]
            .iter()
            .map(|&x| Self::informative_log_pdf(x, theta[0]))
            .sum();
        let noise: f64 = s[INFORMATIVE..].iter().map(|&x| normal_log_pdf(x, 0.0, 1.0)).sum();
        Some(informative + noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn observation_and_dimensions() {
        let t = DistractorTask::new();
        assert_eq!(t.dim_stats(), 11);
        assert_eq!(&t.observed()[..2], &[5.0, 5.0]);
    }

    #[test]
    fn distractors_do_not_depend_on_theta() {
        let t = DistractorTask::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let rows: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|_| {
                let th = t.prior_sample(&mut rng);
                let s = t.simulate(&th, &mut rng).unwrap();
                (th[0], s)
            })
            .collect();
        let bound = 3.0 / (n as f64).sqrt();
        let corr = |k: usize| {
            let mt = rows.iter().map(|r| r.0).sum::<f64>() / n as f64;
            let ms = rows.iter().map(|r| r.1[k]).sum::<f64>() / n as f64;
            let cov: f64 = rows.iter().map(|r| (r.0 - mt) * (r.1[k] - ms)).sum();
            let vt: f64 = rows.iter().map(|r| (r.0 - mt).powi(2)).sum();
            let vs: f64 = rows.iter().map(|r| (r.1[k] - ms).powi(2)).sum();
            cov / (vt * vs).sqrt()
        };
        for k in 2..11 {
            assert!(corr(k).abs() < bound, "stat {k}: {}", corr(k));
        }
    }

    #[test]
    fn informative_density_normalizes() {
        let h = 1e-3;
        let total: f64 = (-20_000..20_000)
            .map(|k| DistractorTask::informative_log_pdf(k as f64 * h, 2.0).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
