use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::ode::{integrate, Tolerances};
use super::{normal_log_pdf, Task};
use crate::error::{Result, SabcError};

pub const POPULATION: f64 = 1_000_000.0;
pub const HORIZON: f64 = 160.0;
pub const N_POINTS: usize = 100;
pub const TRIALS: u64 = 1000;

const INFECTION_PRIOR: (f64, f64) = (0.4, 0.5);
const RECOVERY_PRIOR: (f64, f64) = (0.125, 0.25);
const OBSERVATION_SEED: u64 = 20_240_601;

/// Deterministic SIR epidemic observed through a binomial channel, summarized
/// by six shape statistics of the observed curve.
#[derive(Debug, Clone)]
pub struct SirTask {
    true_theta: Vec<f64>,
    observed_series: Vec<f64>,
    observed: Vec<f64>,
}

impl SirTask {
    /// Task with a synthetic observation at the prior medians.
    pub fn new() -> Result<Self> {
        Self::with_truth(vec![INFECTION_PRIOR.0, RECOVERY_PRIOR.0], OBSERVATION_SEED)
    }

    pub fn with_truth(true_theta: Vec<f64>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let observed_series = observe(&infected_curve(&true_theta)?, &mut rng);
        let observed = summarize(&observed_series);
        Ok(SirTask {
            true_theta,
            observed_series,
            observed,
        })
    }

    pub fn observed_series(&self) -> &[f64] {
        &self.observed_series
    }
}

/// Output times: 100 equidistant points spanning `[0, 160]`.
pub fn output_times() -> Vec<f64> {
    (0..N_POINTS)
        .map(|k| HORIZON * k as f64 / (N_POINTS - 1) as f64)
        .collect()
}

/// Full `(S, I, R)` trajectory at the output times.
pub fn trajectory(theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (beta, gamma) = (theta[0], theta[1]);
    integrate(
        |_, y, dy| {
            let infection = beta * y[0] * y[1] / POPULATION;
            let recovery = gamma * y[1];
            dy[0] = -infection;
            dy[1] = infection - recovery;
            dy[2] = recovery;
        },
        0.0,
        &[POPULATION - 1.0, 1.0, 0.0],
        &output_times(),
        Tolerances::default(),
    )
    .map_err(|e| SabcError::Simulation {
        particle: 0,
        reason: format!("SIR integration failed at theta = {theta:?}: {e}"),
    })
}

/// Infected fraction `I / N` at the output times.
pub fn infected_curve(theta: &[f64]) -> Result<Vec<f64>> {
    Ok(trajectory(theta)?
        .iter()
        .map(|y| (y[1] / POPULATION).clamp(0.0, 1.0))
        .collect())
}

fn observe(curve: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    curve
        .iter()
        .map(|&p| {
            Binomial::new(TRIALS, p)
                .expect("probability clamped to [0, 1]")
                .sample(rng) as f64
        })
        .collect()
}

/// Mean, standard deviation, argmax time / 160, max / 1000, lag-1
/// autocorrelation and half the fraction of the horizon spent at or above half
/// the maximum.
pub fn summarize(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ss: f64 = centred.iter().map(|c| c * c).sum();
    let sd = (ss / n).sqrt();

    let (argmax, max) = y
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let times = output_times();

    let autocorr = if ss > 0.0 {
        centred.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss
    } else {
        0.0
    };

    let half_width = if max > 0.0 {
        let above: Vec<usize> = (0..y.len()).filter(|&i| y[i] >= 0.5 * max).collect();
        let first = above[0];
        let last = above[above.len() - 1];
        0.5 * (times[last] - times[first]) / HORIZON
    } else {
        0.0
    };

    vec![
        mean,
        sd,
        times[argmax] / HORIZON,
        max / TRIALS as f64,
        autocorr,
        half_width,
    ]
}

fn lognormal_sample(median: f64, sigma: f64, rng: &mut dyn RngCore) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (median.ln() + sigma * z).exp()
}

fn lognormal_log_pdf(x: f64, median: f64, sigma: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    normal_log_pdf(x.ln(), median.ln(), sigma) - x.ln()
}

impl Task for SirTask {
    fn name(&self) -> &str {
        "sir"
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn dim_stats(&self) -> usize {
        6
    }

    fn prior_sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![
            lognormal_sample(INFECTION_PRIOR.0, INFECTION_PRIOR.1, rng),
            lognormal_sample(RECOVERY_PRIOR.0, RECOVERY_PRIOR.1, rng),
        ]
    }

    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        lognormal_log_pdf(theta[0], INFECTION_PRIOR.0, INFECTION_PRIOR.1)
            + lognormal_log_pdf(theta[1], RECOVERY_PRIOR.0, RECOVERY_PRIOR.1)
    }

    fn prior_support(&self) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY); 2]
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(observe(&infected_curve(theta)?, rng))
    }

    fn summaries(&self, x: &[f64]) -> Vec<f64> {
        summarize(x)
    }

    fn observed(&self) -> &[f64] {
        &self.observed
    }

    fn true_theta(&self) -> Option<&[f64]> {
        Some(&self.true_theta)
    }

    /// Binomial log-likelihood of the full observed series, up to the
    /// parameter-free binomial coefficients.
    fn log_likelihood(&self, theta: &[f64]) -> Option<f64> {
        if self.prior_log_density(theta) == f64::NEG_INFINITY {
            return Some(f64::NEG_INFINITY);
        }
        let curve = infected_curve(theta).ok()?;
        let trials = TRIALS as f64;
        Some(
            curve
                .iter()
                .zip(&self.observed_series)
                .map(|(&p, &k)| {
                    let hits = if k > 0.0 { k * p.ln() } else { 0.0 };
                    let misses = if k < trials { (trials - k) * (-p).ln_1p() } else { 0.0 };
                    hits + misses
                })
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_transmission_decays_monotonically() {
        let traj = trajectory(&[0.0, 0.125]).unwrap();
        let times = output_times();
        for (t, y) in times.iter().zip(&traj) {
            assert!((y[1] - (-0.125 * t).exp()).abs() < 1e-5 * (-0.125 * t).exp() + 1e-9);
        }
        assert!(traj.windows(2).all(|w| w[1][1] < w[0][1]));
        let task = SirTask::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = task.summaries(&task.simulate(&[0.0, 0.125], &mut rng).unwrap());
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn population_is_conserved() {
        for theta in [[0.4, 0.125], [2.0, 0.05], [0.9, 0.6]] {
            for y in trajectory(&theta).unwrap() {
                let total: f64 = y.iter().sum();
                assert!((total - POPULATION).abs() < 1e-6 * POPULATION);
            }
        }
    }

    #[test]
    fn epidemic_peak_is_interior_at_truth() {
        let curve = infected_curve(&[0.4, 0.125]).unwrap();
        let (argmax, _) = curve
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert!(argmax > 0 && argmax < N_POINTS - 1);
        let task = SirTask::new().unwrap();
        let peak_stat = task.observed()[2];
        assert!(peak_stat > 0.0 && peak_stat < 1.0);
        assert!(task.observed().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn summaries_of_flat_series_are_finite() {
        let s = summarize(&[0.0; N_POINTS]);
        assert_eq!(s, vec![0.0; 6]);
    }

    #[test]
    fn likelihood_peaks_near_truth() {
        let task = SirTask::new().unwrap();
        let at_truth = task.log_likelihood(&[0.4, 0.125]).unwrap();
        for theta in [[0.5, 0.125], [0.4, 0.2], [0.3, 0.1]] {
            assert!(task.log_likelihood(&theta).unwrap() < at_truth);
        }
        assert_eq!(task.log_likelihood(&[-0.1, 0.1]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn lognormal_prior_density_normalizes() {
        let h = 1e-4;
        let total: f64 = (1..100_000)
            .map(|k| lognormal_log_pdf(k as f64 * h, 0.4, 0.5).exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-4);
    }
}
