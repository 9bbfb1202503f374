use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::resample::{ess, systematic_resample, weighted_covariance};
use super::{master_stream, slot_stream, ProposalKernel, Stream};
use crate::config::{Algorithm, RunConfig};
use crate::error::{Result, SabcError};
use crate::record::{JumpLog, Progress, RunRecord, Status, Trajectories};
use crate::tasks::Task;

struct SmcParticle {
    theta: Vec<f64>,
    rho: Vec<f64>,
    distance: f64,
    log_prior: f64,
}

fn aggregate(rho: &[f64]) -> f64 {
    rho.iter().map(|r| r * r).sum::<f64>().sqrt()
}

fn prior_particle(task: &dyn Task, slot: usize, rng: &mut Stream) -> Result<(SmcParticle, u64)> {
    for attempt in 1..=100u64 {
        let theta = task.prior_sample(rng);
        let rho = task.simulate_distances(&theta, rng).map_err(|e| SabcError::Simulation {
            particle: slot,
            reason: e.to_string(),
        })?;
        if rho.iter().all(|r| r.is_finite()) {
            return Ok((
                SmcParticle {
                    log_prior: task.prior_log_density(&theta),
                    distance: aggregate(&rho),
                    theta,
                    rho,
                },
                attempt,
            ));
        }
    }
    Err(SabcError::Simulation {
        particle: slot,
        reason: "non-finite summaries after 100 prior draws".into(),
    })
}

enum Outcome {
    Moved(SmcParticle),
    Stayed { simulated: bool, failed: bool },
}

/// Sequential Monte Carlo ABC with a multiplicatively shrinking tolerance on
/// the Euclidean norm of the per-statistic distances.
///
/// Each round shrinks the tolerance by `eps_decay`, zeroes the weights of
/// particles outside it, resamples when the relative effective sample size
/// falls below `ess_threshold`, and moves every live particle once with a
/// Gaussian Metropolis step. When the previous round accepted fewer than
/// `min_acceptance` of its moves the tolerance is held for a pure
/// rejuvenation round. `updates` bounds the total number of simulations.
pub fn run_smcabc(
    task: Arc<dyn Task>,
    cfg: &RunConfig,
    mut progress: Option<&mut dyn FnMut(&Progress)>,
) -> Result<RunRecord> {
    cfg.validate_settings()?;
    if cfg.algorithm != Algorithm::SmcAbc {
        return Err(SabcError::Config(format!(
            "algorithm: {} is not smc-abc",
            cfg.algorithm.as_str()
        )));
    }
    let start = Instant::now();
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| SabcError::Config(format!("workers: {e}")))?;
    let n = cfg.particles;
    let n_stats = task.dim_stats();
    let mut master = master_stream(cfg.seed);
    let mut streams: Vec<Stream> = (0..n).map(|slot| slot_stream(cfg.seed, slot)).collect();

    let initial: Vec<(SmcParticle, u64)> = workers.install(|| {
        streams
            .par_iter_mut()
            .enumerate()
            .map(|(slot, rng)| prior_particle(&*task, slot, rng))
            .collect::<Result<_>>()
    })?;
    let mut simulator_calls: u64 = initial.iter().map(|p| p.1).sum();
    let mut simulator_failures = 0u64;
    let mut particles: Vec<SmcParticle> = initial.into_iter().map(|p| p.0).collect();
    let mut weights = vec![1.0 / n as f64; n];

    let eps0 = particles.iter().map(|p| p.distance).fold(0.0, f64::max);
    let mut shrinks = 0i32;
    let mut last_accept = 1.0;
    let mut jumps = Vec::new();
    let mut trajectories = Trajectories {
        epsilon: Some(Vec::new()),
        ..Default::default()
    };
    let mut round = 0u64;

    loop {
        let alive = weights.iter().filter(|&&w| w > 0.0).count() as u64;
        if simulator_calls + alive > cfg.updates {
            break;
        }
        round += 1;

        if last_accept >= cfg.min_acceptance {
            let eps = eps0 * cfg.eps_decay.powi(shrinks + 1);
            let reweighted: Vec<f64> = weights
                .iter()
                .zip(&particles)
                .map(|(&w, p)| if p.distance <= eps { w } else { 0.0 })
                .collect();
            let total: f64 = reweighted.iter().sum();
            if total > 0.0 {
                weights = reweighted.into_iter().map(|w| w / total).collect();
                shrinks += 1;
            }
        }
        let eps = eps0 * cfg.eps_decay.powi(shrinks);

        let current_ess = ess(&weights);
        if current_ess / (n as f64) < cfg.ess_threshold {
            let idx = systematic_resample(&weights, n, &mut master);
            particles = idx
                .iter()
                .map(|&i| SmcParticle {
                    theta: particles[i].theta.clone(),
                    rho: particles[i].rho.clone(),
                    distance: particles[i].distance,
                    log_prior: particles[i].log_prior,
                })
                .collect();
            weights = vec![1.0 / n as f64; n];
            jumps.push(JumpLog {
                sweep: round,
                ess: current_ess,
            });
        }

        let thetas: Vec<Vec<f64>> = particles.iter().map(|p| p.theta.clone()).collect();
        let cov: DMatrix<f64> = weighted_covariance(&thetas, &weights) * 2.0;
        let kernel = ProposalKernel::gaussian(&cov)?;

        let outcomes: Vec<Result<Outcome>> = workers.install(|| {
            particles
                .par_iter()
                .zip(&weights)
                .zip(streams.par_iter_mut())
                .map(|((p, &w), rng)| {
                    if w == 0.0 {
                        return Ok(Outcome::Stayed {
                            simulated: false,
                            failed: false,
                        });
                    }
                    let theta = kernel.propose(&p.theta, &[], None, rng)?;
                    let log_prior = task.prior_log_density(&theta);
                    if log_prior == f64::NEG_INFINITY {
                        return Ok(Outcome::Stayed {
                            simulated: false,
                            failed: false,
                        });
                    }
                    let rho = match task.simulate_distances(&theta, rng) {
                        Ok(r) if r.iter().all(|x| x.is_finite()) => r,
                        _ => {
                            return Ok(Outcome::Stayed {
                                simulated: true,
                                failed: true,
                            })
                        }
                    };
                    let distance = aggregate(&rho);
                    let log_a = log_prior - p.log_prior;
                    if distance <= eps && (log_a >= 0.0 || rng.random::<f64>() < log_a.exp()) {
                        Ok(Outcome::Moved(SmcParticle {
                            theta,
                            rho,
                            distance,
                            log_prior,
                        }))
                    } else {
                        Ok(Outcome::Stayed {
                            simulated: true,
                            failed: false,
                        })
                    }
                })
                .collect()
        });
        let mut moved = 0u64;
        let mut attempted = 0u64;
        for (slot, outcome) in outcomes.into_iter().enumerate() {
            match outcome? {
                Outcome::Moved(p) => {
                    particles[slot] = p;
                    moved += 1;
                    attempted += 1;
                    simulator_calls += 1;
                }
                Outcome::Stayed { simulated, failed } => {
                    if weights[slot] > 0.0 {
                        attempted += 1;
                    }
                    simulator_calls += u64::from(simulated);
                    simulator_failures += u64::from(failed);
                }
            }
        }
        last_accept = if attempted > 0 {
            moved as f64 / attempted as f64
        } else {
            0.0
        };

        let mut mean_rho = vec![0.0; n_stats];
        for (p, &w) in particles.iter().zip(&weights) {
            for (m, r) in mean_rho.iter_mut().zip(&p.rho) {
                *m += w * r;
            }
        }
        let beta_e = vec![1.0 / eps; n_stats];
        trajectories.push(round, mean_rho, beta_e, last_accept);
        if let Some(e) = trajectories.epsilon.as_mut() {
            e.push(eps);
        }
        if let Some(cb) = progress.as_mut() {
            cb(&Progress {
                sweep: round,
                u: trajectories.u.last().expect("pushed above"),
                beta_e: trajectories.beta_e.last().expect("pushed above"),
                accept_rate: last_accept,
            });
        }
    }

    let idx = systematic_resample(&weights, n, &mut master);
    Ok(RunRecord {
        config: cfg.clone(),
        posterior: idx.iter().map(|&i| particles[i].theta.clone()).collect(),
        trajectories,
        simulator_calls,
        simulator_failures,
        jumps,
        warnings: Vec::new(),
        status: Status::Ok,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::task_by_name;

    fn config(particles: usize, updates: u64) -> RunConfig {
        let mut cfg = RunConfig::new("gmm", Algorithm::SmcAbc);
        cfg.particles = particles;
        cfg.updates = updates;
        cfg.workers = 2;
        cfg
    }

    #[test]
    fn budget_of_initial_draws_returns_the_prior() {
        let cfg = config(500, 500);
        let record = run_smcabc(task_by_name("gmm").unwrap(), &cfg, None).unwrap();
        assert!(record.trajectories.is_empty());
        assert_eq!(record.simulator_calls, 500);
        let n = record.posterior.len() as f64;
        let se = 20.0 / 12f64.sqrt() / n.sqrt();
        let mean = record.posterior.iter().map(|t| t[0]).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * se);
    }

    #[test]
    fn tolerance_follows_geometric_decay() {
        let cfg = config(200, 200 * 30);
        let record = run_smcabc(task_by_name("gmm").unwrap(), &cfg, None).unwrap();
        let eps = record.trajectories.epsilon.as_ref().unwrap();
        assert!(!eps.is_empty());
        assert!(record.simulator_calls <= cfg.updates);
        // every tolerance is eps_0 * 0.9^k with non-decreasing k
        let eps0 = eps[0] / 0.9;
        let mut last_k = 0;
        for e in eps {
            let k = ((e / eps0).ln() / 0.9f64.ln()).round() as i32;
            assert!((eps0 * 0.9f64.powi(k) - e).abs() <= 1e-12 * e);
            assert!(k >= last_k);
            last_k = k;
        }
        assert_eq!(record.trajectories.len(), eps.len());
        assert_eq!(record.posterior.len(), 200);
    }

    #[test]
    fn seed_deterministic() {
        let cfg = config(200, 200 * 10);
        let a = run_smcabc(task_by_name("two_moons").unwrap(), &cfg, None).unwrap();
        let b = run_smcabc(task_by_name("two_moons").unwrap(), &cfg, None).unwrap();
        assert_eq!(a.posterior, b.posterior);
    }
}
