//! Particle population, moves and the two sampler drivers.

mod proposal;
pub mod resample;
mod sabc;
mod smc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealing::TemperatureState;
use crate::energy::EnergyTransform;
use crate::error::{Result, SabcError};
use crate::tasks::Task;

pub use proposal::ProposalKernel;
pub use sabc::{run_sabc, Sabc};
pub use smc::run_smcabc;

/// Runs whichever algorithm `cfg` names.
pub fn run(
    task: std::sync::Arc<dyn Task>,
    cfg: &crate::config::RunConfig,
    progress: Option<&mut dyn FnMut(&crate::record::Progress)>,
) -> Result<crate::record::RunRecord> {
    match cfg.algorithm {
        crate::config::Algorithm::SmcAbc => run_smcabc(task, cfg, progress),
        _ => run_sabc(task, cfg, progress),
    }
}

/// Random stream type used for every slot and for the driver itself.
pub type Stream = ChaCha8Rng;

const MAX_REDRAWS: usize = 100;

/// Per-slot stream `slot + 1` of the seed; stream 0 belongs to the driver.
pub fn slot_stream(seed: u64, slot: usize) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot as u64 + 1);
    rng
}

pub fn master_stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: Vec<f64>,
    /// Energies in `[0, 1]`, one per statistic.
    pub u: Vec<f64>,
    pub log_prior: f64,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub particles: Vec<Particle>,
    pub temps: TemperatureState,
    /// Accepted updates since the last importance jump.
    pub accepted_count: u64,
    /// Effective sample size of the most recent reweighting.
    pub ess: f64,
    pub simulator_calls: u64,
    pub simulator_failures: u64,
    pub(crate) streams: Vec<Stream>,
    pub(crate) master: Stream,
}

impl Population {
    /// Wraps existing particles at infinite temperature.
    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Self {
        let n_stats = particles.first().map_or(0, |p| p.u.len());
        let n = particles.len();
        let mut pop = Population {
            temps: TemperatureState::hot(n_stats),
            accepted_count: 0,
            ess: n as f64,
            simulator_calls: 0,
            simulator_failures: 0,
            streams: (0..n).map(|slot| slot_stream(seed, slot)).collect(),
            master: master_stream(seed),
            particles,
        };
        pop.temps.u = pop.energy_density();
        pop
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Per-statistic mean energy `U_i`.
    pub fn energy_density(&self) -> Vec<f64> {
        let n_stats = self.temps.beta_e.len();
        let mut sum = vec![0.0; n_stats];
        for p in &self.particles {
            for (s, u) in sum.iter_mut().zip(&p.u) {
                *s += u;
            }
        }
        sum.iter().map(|s| s / self.particles.len() as f64).collect()
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.theta.clone()).collect()
    }

    pub fn master_rng(&mut self) -> &mut Stream {
        &mut self.master
    }
}

fn draw_from_prior(
    task: &dyn Task,
    slot: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, Vec<f64>, u64)> {
    for attempt in 1..=MAX_REDRAWS {
        let theta = task.prior_sample(rng);
        let rho = task.simulate_distances(&theta, rng).map_err(|e| SabcError::Simulation {
            particle: slot,
            reason: e.to_string(),
        })?;
        if rho.iter().all(|r| r.is_finite()) {
            return Ok((theta, rho, attempt as u64));
        }
    }
    Err(SabcError::Simulation {
        particle: slot,
        reason: format!("non-finite summaries after {MAX_REDRAWS} prior draws"),
    })
}

/// Draws `n` particles from the prior, builds the energy transform from their
/// distances and rectifies them. Temperatures start at zero.
pub fn initialize(task: &dyn Task, n: usize, seed: u64) -> Result<(Population, EnergyTransform)> {
    if n < 100 {
        return Err(SabcError::Config(format!("population needs at least 100 particles, got {n}")));
    }
    let mut streams: Vec<Stream> = (0..n).map(|slot| slot_stream(seed, slot)).collect();
    let draws: Vec<(Vec<f64>, Vec<f64>, u64)> = streams
        .par_iter_mut()
        .enumerate()
        .map(|(slot, rng)| draw_from_prior(task, slot, rng))
        .collect::<Result<_>>()?;
    let distances: Vec<Vec<f64>> = draws.iter().map(|d| d.1.clone()).collect();
    let transform = EnergyTransform::build(&distances)?;
    let particles = draws
        .iter()
        .zip(streams.iter_mut())
        .map(|((theta, rho, _), rng)| {
            Ok(Particle {
                log_prior: task.prior_log_density(theta),
                u: transform.to_energy_vector_tied(rho, rng)?,
                theta: theta.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pop = Population::from_particles(particles, seed);
    pop.streams = streams;
    pop.simulator_calls = draws.iter().map(|d| d.2).sum();
    Ok((pop, transform))
}

/// Result of one Metropolis update of one particle.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    Accepted(Particle),
    Rejected,
    /// Proposal outside the prior support; no simulation was run.
    OutOfSupport,
    /// The simulator or the energy lookup failed; counts as a rejection.
    Failed,
}

impl Move {
    pub fn simulated(&self) -> bool {
        !matches!(self, Move::OutOfSupport)
    }
}

/// Everything a Metropolis update reads besides the particle itself.
pub struct MoveContext<'a> {
    pub task: &'a dyn Task,
    pub transform: &'a EnergyTransform,
    pub kernel: &'a ProposalKernel,
    pub beta_e: &'a [f64],
}

/// Proposes, simulates and accepts with probability
/// `min(1, exp(-sum_i beta_e_i (u'_i - u_i)) f(theta') / f(theta))`.
pub fn metropolis_step(
    ctx: &MoveContext<'_>,
    particle: &Particle,
    pool: &[Particle],
    exclude: Option<usize>,
    rng: &mut dyn RngCore,
) -> Result<Move> {
    let theta = ctx.kernel.propose(&particle.theta, pool, exclude, rng)?;
    let log_prior = ctx.task.prior_log_density(&theta);
    if log_prior == f64::NEG_INFINITY {
        return Ok(Move::OutOfSupport);
    }
    let u = match ctx
        .task
        .simulate_distances(&theta, rng)
        .and_then(|rho| ctx.transform.to_energy_vector_tied(&rho, rng))
    {
        Ok(u) => u,
        Err(_) => return Ok(Move::Failed),
    };
    let energy_change: f64 = ctx
        .beta_e
        .iter()
        .zip(u.iter().zip(&particle.u))
        .map(|(b, (new, old))| b * (new - old))
        .sum();
    let log_a = -energy_change + log_prior - particle.log_prior;
    if log_a >= 0.0 || rng.random::<f64>() < log_a.exp() {
        Ok(Move::Accepted(Particle { theta, u, log_prior }))
    } else {
        Ok(Move::Rejected)
    }
}

/// Log importance weights `-delta sum_i beta_e_i u_i` of every particle.
pub fn jump_log_weights(pop: &Population, delta: f64) -> Vec<f64> {
    pop.particles
        .iter()
        .map(|p| -delta * p.u.iter().zip(&pop.temps.beta_e).map(|(u, b)| u * b).sum::<f64>())
        .collect()
}

/// Lowers the temperature by the factor `1 + delta`, reweighting and
/// systematically resampling the population to compensate.
///
/// Returns the effective sample size before resampling, or `None` when every
/// weight vanished and the jump was skipped.
pub fn importance_jump(pop: &mut Population, delta: f64) -> Option<f64> {
    let weights = resample::normalize_log_weights(&jump_log_weights(pop, delta))?;
    let ess = resample::ess(&weights);
    let n = pop.len();
    let idx = resample::systematic_resample(&weights, n, &mut pop.master);
    pop.particles = idx.iter().map(|&i| pop.particles[i].clone()).collect();
    for b in &mut pop.temps.beta_e {
        *b *= 1.0 + delta;
    }
    pop.accepted_count = 0;
    pop.ess = ess;
    pop.temps.u = pop.energy_density();
    Some(ess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{GmmTask, UniformBox};

    /// One uniform parameter on `[0, 2]`; its single distance is the
    /// parameter itself, so energies are a known function of position.
    pub(crate) struct Ramp;

    impl Task for Ramp {
        fn name(&self) -> &str {
            "ramp"
        }
        fn dim_theta(&self) -> usize {
            1
        }
        fn dim_stats(&self) -> usize {
            1
        }
        fn prior_sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
            UniformBox { lo: 0.0, hi: 2.0, dim: 1 }.sample(rng)
        }
        fn prior_log_density(&self, theta: &[f64]) -> f64 {
            UniformBox { lo: 0.0, hi: 2.0, dim: 1 }.log_density(theta)
        }
        fn prior_support(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 2.0)]
        }
        fn simulate(&self, theta: &[f64], _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
            Ok(theta.to_vec())
        }
        fn summaries(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
        fn observed(&self) -> &[f64] {
            &[0.0]
        }
    }

    fn particle(theta: f64, u: f64) -> Particle {
        Particle {
            theta: vec![theta],
            u: vec![u],
            log_prior: -std::f64::consts::LN_2,
        }
    }

    #[test]
    fn initial_population() {
        let task = GmmTask::new();
        let (pop, transform) = initialize(&task, 200, 7).unwrap();
        assert_eq!(pop.len(), 200);
        assert_eq!(transform.table_len(), 200);
        assert!(pop.temps.beta_e.iter().all(|&b| b == 0.0));
        for &u in &pop.temps.u {
            assert!((u - 0.5).abs() < 1e-12, "{u}");
        }
        assert_eq!(pop.simulator_calls, 200);
        assert!(initialize(&task, 99, 7).is_err());
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        let task = GmmTask::new();
        let (a, ta) = initialize(&task, 150, 11).unwrap();
        let (b, tb) = initialize(&task, 150, 11).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(ta, tb);
        let (c, _) = initialize(&task, 150, 12).unwrap();
        assert_ne!(a.particles, c.particles);
    }

    fn ramp_context<'a>(
        transform: &'a EnergyTransform,
        kernel: &'a ProposalKernel,
        beta_e: &'a [f64],
    ) -> MoveContext<'a> {
        MoveContext {
            task: &Ramp,
            transform,
            kernel,
            beta_e,
        }
    }

    #[test]
    fn hot_chain_accepts_everything_in_support() {
        let (pop, transform) = initialize(&Ramp, 100, 1).unwrap();
        let kernel = ProposalKernel::differential_evolution(0.3, 0.01);
        let ctx = ramp_context(&transform, &kernel, &[0.0]);
        let mut rng = slot_stream(0, 0);
        for a in 0..pop.len() {
            let m = metropolis_step(&ctx, &pop.particles[a], &pop.particles, Some(a), &mut rng).unwrap();
            assert!(matches!(m, Move::Accepted(_) | Move::OutOfSupport));
        }
    }

    #[test]
    fn zero_energy_change_always_accepted() {
        let transform = EnergyTransform::from_tables(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let kernel = ProposalKernel::differential_evolution(0.0, 1e-9);
        let ctx = ramp_context(&transform, &kernel, &[5.0]);
        let p = Particle {
            theta: vec![1.0],
            u: vec![0.5],
            log_prior: -std::f64::consts::LN_2,
        };
        let pool = vec![p.clone(), p.clone(), p.clone()];
        let mut rng = slot_stream(0, 1);
        for _ in 0..1000 {
            let m = metropolis_step(&ctx, &p, &pool, Some(0), &mut rng).unwrap();
            assert!(matches!(m, Move::Accepted(_)));
        }
    }

    #[test]
    fn acceptance_probability_one_half() {
        // table [0, 1]: distance 1 has energy 1, the current particle has 0
        let transform = EnergyTransform::from_tables(vec![vec![0.0, 1.0]]).unwrap();
        // jump by exactly +1 via a partner difference of 1
        let kernel = ProposalKernel::differential_evolution(1.0, 0.0);
        let beta = [std::f64::consts::LN_2];
        let ctx = ramp_context(&transform, &kernel, &beta);
        let current = particle(0.0, 0.0);
        let pool = vec![current.clone(), particle(1.0, 1.0), particle(0.0, 0.0)];
        let mut rng = slot_stream(0, 2);
        let trials = 100_000;
        let mut accepted = 0usize;
        let mut attempted = 0usize;
        for _ in 0..trials {
            match metropolis_step(&ctx, &current, &pool, Some(0), &mut rng).unwrap() {
                Move::Accepted(p) if p.theta[0] == 1.0 => {
                    accepted += 1;
                    attempted += 1;
                }
                Move::Rejected => attempted += 1,
                _ => {}
            }
        }
        let rate = accepted as f64 / attempted as f64;
        let se = (0.25 / attempted as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "{rate}");
    }

    #[test]
    fn out_of_support_is_rejected_without_simulation() {
        let transform = EnergyTransform::from_tables(vec![vec![0.0, 1.0]]).unwrap();
        let kernel = ProposalKernel::differential_evolution(10.0, 0.0);
        let ctx = ramp_context(&transform, &kernel, &[0.0]);
        let current = particle(1.5, 0.5);
        let pool = vec![current.clone(), particle(1.0, 0.5), particle(0.0, 0.0)];
        let mut rng = slot_stream(0, 3);
        for _ in 0..100 {
            let m = metropolis_step(&ctx, &current, &pool, Some(0), &mut rng).unwrap();
            assert_eq!(m, Move::OutOfSupport);
            assert!(!m.simulated());
        }
    }

    #[test]
    fn jump_weights_two_thirds_one_third() {
        let mut pop = Population::from_particles(vec![particle(0.0, 0.0), particle(1.0, 1.0)], 0);
        pop.temps.beta_e = vec![std::f64::consts::LN_2];
        let w = resample::normalize_log_weights(&jump_log_weights(&pop, 1.0)).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
        let ess = importance_jump(&mut pop, 1.0).unwrap();
        assert!((ess - 1.0 / (4.0 / 9.0 + 1.0 / 9.0)).abs() < 1e-12);
        assert!((pop.temps.beta_e[0] - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(pop.accepted_count, 0);
    }

    #[test]
    fn jump_with_vanishing_delta_keeps_population() {
        let (mut pop, _) = initialize(&Ramp, 100, 3).unwrap();
        pop.temps.beta_e = vec![2.0];
        let before = pop.particles.clone();
        importance_jump(&mut pop, 1e-300).unwrap();
        assert_eq!(pop.particles, before);
        assert_eq!(pop.temps.beta_e, vec![2.0]);
    }

    #[test]
    fn jump_preserves_weighted_mean_energy() {
        // resampling is unbiased: over many seeds the post-jump mean energy
        // averages to the pre-jump weighted mean
        let (base, _) = initialize(&Ramp, 100, 5).unwrap();
        let mut pop = base.clone();
        pop.temps.beta_e = vec![3.0];
        let w = resample::normalize_log_weights(&jump_log_weights(&pop, 0.5)).unwrap();
        let target: f64 = w.iter().zip(&pop.particles).map(|(w, p)| w * p.u[0]).sum();
        let reps = 400;
        let means: Vec<f64> = (0..reps)
            .map(|seed| {
                let mut p = pop.clone();
                p.master = master_stream(seed);
                importance_jump(&mut p, 0.5).unwrap();
                p.energy_density()[0]
            })
            .collect();
        let m = means.iter().sum::<f64>() / reps as f64;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((m - target).abs() < 3.0 * sd / (reps as f64).sqrt() + 1e-12, "{m} vs {target}");
    }
}
