use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::{
    importance_jump, initialize, metropolis_step, Move, MoveContext, Population, ProposalKernel,
};
use crate::annealing::{beta_of_u, update_beta_e_multi, update_beta_e_single, Schedule, ScheduleMode};
use crate::config::{Algorithm, Driver, RunConfig};
use crate::energy::EnergyTransform;
use crate::error::{Result, SabcError};
use crate::record::{JumpLog, Progress, RunRecord, Status, Trajectories};
use crate::tasks::Task;

/// A running SABC sampler: population, energy transform, schedule and
/// bookkeeping.
pub struct Sabc {
    task: Arc<dyn Task>,
    transform: EnergyTransform,
    schedule: Schedule,
    kernel: ProposalKernel,
    pop: Population,
    delta: f64,
    driver: Driver,
    workers: rayon::ThreadPool,
    config: RunConfig,
    jumps: Vec<JumpLog>,
    warnings: Vec<String>,
    status: Status,
    trajectories: Trajectories,
}

impl Sabc {
    /// Draws and rectifies the initial population.
    pub fn new(task: Arc<dyn Task>, cfg: &RunConfig) -> Result<Self> {
        cfg.validate_settings()?;
        let mode = match cfg.algorithm {
            Algorithm::SabcSingle => ScheduleMode::Single,
            Algorithm::SabcMulti => ScheduleMode::Multi,
            Algorithm::SmcAbc => {
                return Err(SabcError::Config("algorithm: smc-abc is not an SABC variant".into()))
            }
        };
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| SabcError::Config(format!("workers: {e}")))?;
        let schedule = Schedule::new(mode, cfg.v, task.dim_stats())?;
        let (pop, transform) = workers.install(|| initialize(&*task, cfg.particles, cfg.seed))?;
        let gamma = cfg.gamma.unwrap_or_else(|| ProposalKernel::default_gamma(task.dim_theta()));
        let mut kernel = ProposalKernel::new(cfg.kernel, gamma, cfg.jitter);
        kernel.adapt(&pop.particles)?;
        Ok(Sabc {
            task,
            transform,
            schedule,
            kernel,
            pop,
            delta: cfg.delta,
            driver: cfg.driver,
            workers,
            config: cfg.clone(),
            jumps: Vec::new(),
            warnings: Vec::new(),
            status: Status::Ok,
            trajectories: Trajectories::default(),
        })
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn population_mut(&mut self) -> &mut Population {
        &mut self.pop
    }

    pub fn transform(&self) -> &EnergyTransform {
        &self.transform
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn trajectories(&self) -> &Trajectories {
        &self.trajectories
    }

    /// Overrides the external inverse temperatures.
    pub fn set_beta_e(&mut self, beta_e: Vec<f64>) {
        assert_eq!(beta_e.len(), self.pop.temps.beta_e.len());
        self.pop.temps.beta_e = beta_e;
    }

    fn record_move(pop: &mut Population, mv: &Move) {
        if mv.simulated() {
            pop.simulator_calls += 1;
        }
        if matches!(mv, Move::Failed) {
            pop.simulator_failures += 1;
        }
    }

    /// Updates every particle once at the current temperatures and returns
    /// the number of accepted moves.
    ///
    /// The population is split into two halves; each half is updated in
    /// parallel while the other half, frozen, supplies the proposal partners.
    /// Temperatures are left untouched.
    pub fn sweep(&mut self) -> Result<u64> {
        let half = self.pop.len() / 2;
        let mut accepted = 0;
        for first in [true, false] {
            let Population {
                particles,
                streams,
                temps,
                ..
            } = &mut self.pop;
            let (lo, hi) = particles.split_at_mut(half);
            let (rng_lo, rng_hi) = streams.split_at_mut(half);
            let (active, partners, rngs) = if first {
                (lo, &*hi, rng_lo)
            } else {
                (hi, &*lo, rng_hi)
            };
            let ctx = MoveContext {
                task: &*self.task,
                transform: &self.transform,
                kernel: &self.kernel,
                beta_e: &temps.beta_e,
            };
            let moves: Vec<Result<Move>> = self.workers.install(|| {
                active
                    .par_iter()
                    .zip(rngs.par_iter_mut())
                    .map(|(p, rng)| metropolis_step(&ctx, p, partners, None, rng))
                    .collect()
            });
            let mut updates = Vec::with_capacity(moves.len());
            for mv in moves {
                updates.push(mv?);
            }
            for (p, mv) in active.iter_mut().zip(&updates) {
                if let Move::Accepted(new) = mv {
                    *p = new.clone();
                    accepted += 1;
                }
            }
            for mv in &updates {
                Self::record_move(&mut self.pop, mv);
            }
        }
        self.pop.accepted_count += accepted;
        Ok(accepted)
    }

    /// Updates one randomly chosen particle against the rest of the
    /// population. Returns whether the move was accepted; the population
    /// energy density is not refreshed.
    pub fn serial_step(&mut self) -> Result<Option<(usize, Vec<f64>)>> {
        let n = self.pop.len();
        let alpha = self.pop.master.random_range(0..n);
        let ctx = MoveContext {
            task: &*self.task,
            transform: &self.transform,
            kernel: &self.kernel,
            beta_e: &self.pop.temps.beta_e,
        };
        let mv = metropolis_step(
            &ctx,
            &self.pop.particles[alpha],
            &self.pop.particles,
            Some(alpha),
            &mut self.pop.master,
        )?;
        Self::record_move(&mut self.pop, &mv);
        Ok(match mv {
            Move::Accepted(new) => {
                let old = std::mem::replace(&mut self.pop.particles[alpha], new);
                self.pop.accepted_count += 1;
                Some((alpha, old.u))
            }
            _ => None,
        })
    }

    fn jump(&mut self, sweep: u64) {
        match importance_jump(&mut self.pop, self.delta) {
            Some(ess) => self.jumps.push(JumpLog { sweep, ess }),
            None => {
                self.warnings.push(format!(
                    "sweep {sweep}: all importance weights vanished, jump skipped"
                ));
                self.pop.accepted_count = 0;
            }
        }
    }

    fn jump_due(&self) -> bool {
        self.pop.accepted_count >= 2 * self.pop.len() as u64
    }

    /// Raises `beta_e` towards the schedule's target for energy densities `u`.
    /// Returns false once an energy density hits the numerical floor.
    fn update_temperatures(&mut self, u: &[f64]) -> Result<bool> {
        self.pop.temps.u.copy_from_slice(u);
        if self.schedule.v == 0.0 {
            return Ok(true);
        }
        // sampling noise can lift a density marginally above its prior mean
        let clamped: Vec<f64> = u.iter().map(|x| x.min(0.5)).collect();
        let target = match self.schedule.mode {
            ScheduleMode::Multi => update_beta_e_multi(&self.schedule, &clamped),
            ScheduleMode::Single => {
                let total = clamped.iter().sum::<f64>() / clamped.len() as f64;
                update_beta_e_single(&self.schedule, total).map(|b| vec![b; clamped.len()])
            }
        };
        match target {
            Ok(t) => {
                for (b, t) in self.pop.temps.beta_e.iter_mut().zip(t) {
                    *b = b.max(t);
                }
                Ok(true)
            }
            Err(SabcError::TemperatureOverflow { .. }) => {
                self.status = Status::ConvergedToFloor;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn refresh_internal_beta(&mut self) {
        let temps = &mut self.pop.temps;
        let densities: Vec<f64> = match self.schedule.mode {
            ScheduleMode::Multi => temps.u.clone(),
            ScheduleMode::Single => {
                vec![temps.u.iter().sum::<f64>() / temps.u.len() as f64; temps.u.len()]
            }
        };
        temps.beta = densities
            .iter()
            .map(|&x| beta_of_u(x.min(0.5)).unwrap_or(f64::INFINITY))
            .collect();
    }

    fn record(&mut self, sweep: u64, accept_rate: f64, progress: &mut Option<&mut dyn FnMut(&Progress)>) {
        self.refresh_internal_beta();
        let temps = &self.pop.temps;
        self.trajectories
            .push(sweep, temps.u.clone(), temps.beta_e.clone(), accept_rate);
        if let Some(cb) = progress {
            cb(&Progress {
                sweep,
                u: &temps.u,
                beta_e: &temps.beta_e,
                accept_rate,
            });
        }
    }

    fn run_parallel(&mut self, sweeps: u64, progress: &mut Option<&mut dyn FnMut(&Progress)>) -> Result<()> {
        let n = self.pop.len() as f64;
        for s in 1..=sweeps {
            let accepted = self.sweep()?;
            if self.jump_due() {
                self.jump(s);
            }
            let u = self.pop.energy_density();
            let running = self.update_temperatures(&u)?;
            self.kernel.adapt(&self.pop.particles)?;
            self.record(s, accepted as f64 / n, progress);
            if !running {
                break;
            }
        }
        Ok(())
    }

    fn run_serial(&mut self, sweeps: u64, progress: &mut Option<&mut dyn FnMut(&Progress)>) -> Result<()> {
        let n = self.pop.len();
        let mut sum = self.pop.energy_density().iter().map(|u| u * n as f64).collect::<Vec<_>>();
        let mut u = vec![0.0; sum.len()];
        for s in 1..=sweeps {
            let mut accepted = 0u64;
            let mut running = true;
            for _ in 0..n {
                if let Some((alpha, old)) = self.serial_step()? {
                    accepted += 1;
                    for ((acc, new), old) in sum.iter_mut().zip(&self.pop.particles[alpha].u).zip(old) {
                        *acc += new - old;
                    }
                }
                if self.jump_due() {
                    self.jump(s);
                    sum = self.pop.energy_density().iter().map(|u| u * n as f64).collect();
                }
                for (ui, acc) in u.iter_mut().zip(&sum) {
                    *ui = (acc / n as f64).max(0.0);
                }
                running = self.update_temperatures(&u)?;
                if !running {
                    break;
                }
            }
            // drop accumulated rounding once per sweep
            let exact = self.pop.energy_density();
            sum = exact.iter().map(|u| u * n as f64).collect();
            self.pop.temps.u = exact;
            self.kernel.adapt(&self.pop.particles)?;
            self.record(s, accepted as f64 / n as f64, progress);
            if !running {
                break;
            }
        }
        Ok(())
    }

    /// Runs `updates` single-particle updates (rounded down to whole sweeps,
    /// at least one) and returns the run record.
    pub fn run(mut self, updates: u64, mut progress: Option<&mut dyn FnMut(&Progress)>) -> Result<RunRecord> {
        let start = Instant::now();
        let sweeps = (updates / self.pop.len() as u64).max(1);
        self.jump(0);
        match self.driver {
            Driver::Parallel => self.run_parallel(sweeps, &mut progress)?,
            Driver::Serial => self.run_serial(sweeps, &mut progress)?,
        }
        Ok(RunRecord {
            config: self.config.clone(),
            posterior: self.pop.thetas(),
            trajectories: self.trajectories,
            simulator_calls: self.pop.simulator_calls,
            simulator_failures: self.pop.simulator_failures,
            jumps: self.jumps,
            warnings: self.warnings,
            status: self.status,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Runs SABC in the configured mode and driver.
pub fn run_sabc(
    task: Arc<dyn Task>,
    cfg: &RunConfig,
    progress: Option<&mut dyn FnMut(&Progress)>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let sampler = Sabc::new(task, cfg)?;
    let mut record = sampler.run(cfg.updates, progress)?;
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}
