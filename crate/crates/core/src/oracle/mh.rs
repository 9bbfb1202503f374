use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, SabcError};
use crate::sampler::resample::sample_covariance;
use crate::sampler::slot_stream;
use crate::tasks::Task;

/// Chain layout and convergence threshold for the random-walk reference
/// sampler.
#[derive(Debug, Clone, Copy)]
pub struct MhSettings {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub length: usize,
    pub warmup: usize,
    pub max_rhat: f64,
}

impl Default for MhSettings {
    fn default() -> Self {
        MhSettings {
            chains: 10,
            length: 20_000,
            warmup: 10_000,
            max_rhat: 1.01,
        }
    }
}

const TARGET_ACCEPT: f64 = 0.234;
const WIDE_PROB: f64 = 0.1;
const PRIOR_PROB: f64 = 0.1;
const WIDE_FACTOR: f64 = 25.0;
const INIT_DRAWS: usize = 200;

/// Log prior and log likelihood; the likelihood is `-inf` off the support.
fn log_parts(task: &dyn Task, theta: &[f64]) -> Result<(f64, f64)> {
    let lp = task.prior_log_density(theta);
    if lp == f64::NEG_INFINITY {
        return Ok((lp, lp));
    }
    let ll = task.log_likelihood(theta).ok_or_else(|| {
        SabcError::Oracle(format!("task `{}` has no tractable likelihood", task.name()))
    })?;
    Ok((lp, if ll.is_nan() { f64::NEG_INFINITY } else { ll }))
}

fn cholesky(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let scale = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max).max(1e-300);
    for ridge in [0.0, 1e-10, 1e-6, 1e-3] {
        if let Some(c) = (cov + DMatrix::identity(d, d) * (ridge * scale)).cholesky() {
            return c.l();
        }
    }
    DMatrix::identity(d, d) * scale.sqrt()
}

/// Running mean and covariance.
struct Welford {
    n: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Welford {
            n: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.n += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.n;
        self.m2 += &delta * (&x - &self.mean).transpose();
    }

    fn covariance(&self) -> DMatrix<f64> {
        &self.m2 / (self.n - 1.0)
    }
}

fn run_chain(task: &dyn Task, settings: &MhSettings, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    let d = task.dim_theta();
    let starts: Vec<Vec<f64>> = (0..INIT_DRAWS).map(|_| task.prior_sample(rng)).collect();
    let mut best = ((f64::NEG_INFINITY, f64::NEG_INFINITY), starts[0].clone());
    for s in &starts {
        let parts = log_parts(task, s)?;
        if parts.0 + parts.1 > best.0 .0 + best.0 .1 {
            best = (parts, s.clone());
        }
    }
    let ((mut lp, mut ll), mut theta) = best;
    if lp + ll == f64::NEG_INFINITY {
        return Err(SabcError::Oracle("no prior draw has positive posterior density".into()));
    }

    let mut base_cov = sample_covariance(&starts) * 0.01;
    let mut chol = cholesky(&base_cov);
    let mut log_scale = (2.38f64 * 2.38 / d as f64).ln();
    let mut stats = Welford::new(d);
    let mut out = Vec::with_capacity(settings.length - settings.warmup);

    // Each iteration picks one of three kernels, each reversible on its own:
    // the adapted random walk, a widened random walk for crossing between
    // modes, and an independence draw from the prior.
    for t in 0..settings.length {
        let warm = t < settings.warmup;
        let pick: f64 = rng.random();
        let from_prior = pick < PRIOR_PROB;
        let wide = !from_prior && pick < PRIOR_PROB + WIDE_PROB;
        let proposal: Vec<f64> = if from_prior {
            task.prior_sample(rng)
        } else {
            let s = log_scale.exp() * if wide { WIDE_FACTOR } else { 1.0 };
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            (0..d)
                .map(|r| theta[r] + s.sqrt() * (0..=r).map(|c| chol[(r, c)] * z[c]).sum::<f64>())
                .collect()
        };
        let (lp_new, ll_new) = log_parts(task, &proposal)?;
        let log_a = if from_prior {
            ll_new - ll
        } else {
            lp_new + ll_new - lp - ll
        };
        let accept_prob = if log_a >= 0.0 { 1.0 } else { log_a.exp() };
        if rng.random::<f64>() < accept_prob {
            theta = proposal;
            (lp, ll) = (lp_new, ll_new);
        }
        if warm {
            if !wide && !from_prior {
                log_scale += (accept_prob - TARGET_ACCEPT) / (t as f64 + 1.0).powf(0.6);
            }
            stats.push(&theta);
            if t >= 500 && t % 100 == 0 {
                base_cov = stats.covariance();
                chol = cholesky(&base_cov);
            }
        } else {
            out.push(theta.clone());
        }
    }
    Ok(out)
}

/// Split-chain potential scale reduction of one scalar quantity.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[h..2 * h]]
        })
        .collect();
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Draws from the exact posterior of a task with tractable likelihood using
/// independent adaptive random-walk Metropolis chains.
///
/// Returns the post-warmup draws of every chain, chain by chain.
pub fn mh_chains(task: &dyn Task, settings: &MhSettings, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    if settings.length <= settings.warmup + 1 || settings.chains < 2 {
        return Err(SabcError::Oracle("need two chains with post-warmup draws".into()));
    }
    let chains: Vec<Vec<Vec<f64>>> = (0..settings.chains)
        .into_par_iter()
        .map(|c| run_chain(task, settings, &mut slot_stream(seed, c)))
        .collect::<Result<_>>()?;
    for k in 0..task.dim_theta() {
        let coord: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|t| t[k]).collect()).collect();
        let rhat = split_rhat(&coord);
        if !(rhat < settings.max_rhat) {
            return Err(SabcError::Oracle(format!(
                "Metropolis reference for `{}` did not converge: split R-hat {rhat:.4} on coordinate {}",
                task.name(),
                k + 1
            )));
        }
    }
    Ok(chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rhat_of_identical_chains_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        assert!((split_rhat(&chains) - 1.0).abs() < 0.01);
        let mut shifted = chains.clone();
        for x in &mut shifted[0] {
            *x += 3.0;
        }
        assert!(split_rhat(&shifted) > 1.2);
    }

    #[test]
    fn welford_matches_batch_covariance() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 0.0], vec![1.0, 3.0], vec![4.0, 4.0]];
        let mut w = Welford::new(2);
        for p in &pts {
            w.push(p);
        }
        assert!((w.covariance() - sample_covariance(&pts)).norm() < 1e-12);
    }
}
