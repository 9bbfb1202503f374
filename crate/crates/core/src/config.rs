//! Run configuration shared by the samplers and the command-line harness.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};
use crate::tasks::TASK_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SabcSingle,
    SabcMulti,
    SmcAbc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::SabcSingle, Algorithm::SabcMulti, Algorithm::SmcAbc];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SabcSingle => "sabc-single",
            Algorithm::SabcMulti => "sabc-multi",
            Algorithm::SmcAbc => "smc-abc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

/// How SABC interleaves particle updates with temperature updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Driver {
    /// One random particle per iteration, temperature update every iteration.
    Serial,
    /// Whole-population sweeps, temperature update once per sweep.
    Parallel,
}

/// Parameter-space proposal family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    DifferentialEvolution,
    GaussianRandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: String,
    pub algorithm: Algorithm,
    pub particles: usize,
    /// Total single-particle updates (SABC) or simulations (SMC-ABC).
    pub updates: u64,
    /// Annealing velocity; 0 freezes the temperatures.
    pub v: f64,
    /// Importance-jump temperature step, `beta_e -> (1 + delta) beta_e`.
    pub delta: f64,
    pub kernel: KernelKind,
    /// Differential-evolution scale; `None` means `2.38 / sqrt(2 d)`.
    pub gamma: Option<f64>,
    pub jitter: f64,
    pub seed: u64,
    pub workers: usize,
    pub driver: Driver,
    pub eps_decay: f64,
    pub ess_threshold: f64,
    /// SMC-ABC holds its tolerance for a round when the previous round's
    /// acceptance rate fell below this.
    pub min_acceptance: f64,
}

impl RunConfig {
    pub fn new(task: &str, algorithm: Algorithm) -> Self {
        RunConfig {
            task: task.to_string(),
            algorithm,
            particles: 1000,
            updates: 1_000_000,
            v: 1.0,
            delta: 0.1,
            kernel: KernelKind::DifferentialEvolution,
            gamma: None,
            jitter: 1e-6,
            seed: 0,
            workers: 1,
            driver: Driver::Parallel,
            eps_decay: 0.9,
            ess_threshold: 0.2,
            min_acceptance: 0.02,
        }
    }

    /// Numeric checks plus a lookup of `task` among the built-in tasks.
    pub fn validate(&self) -> Result<()> {
        if !TASK_NAMES.contains(&self.task.as_str()) {
            return Err(SabcError::Config(format!("task: unknown task `{}`", self.task)));
        }
        self.validate_settings()
    }

    /// Numeric checks only; `task` is a free-form label. Used by the samplers,
    /// which receive the task object directly.
    pub fn validate_settings(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(SabcError::Config(format!("{field}: {msg}")));
        if self.particles < 100 {
            return bad("particles", format!("need at least 100, got {}", self.particles));
        }
        if self.updates == 0 {
            return bad("updates", "must be positive".into());
        }
        if !(self.v.is_finite() && self.v >= 0.0) {
            return bad("v", format!("must be finite and >= 0, got {}", self.v));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad("delta", format!("must be finite and > 0, got {}", self.delta));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return bad("gamma", format!("must be finite and > 0, got {g}"));
            }
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad("jitter", format!("must be finite and >= 0, got {}", self.jitter));
        }
        if self.workers == 0 {
            return bad("workers", "must be positive".into());
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return bad("eps_decay", format!("must lie in (0, 1), got {}", self.eps_decay));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return bad("ess_threshold", format!("must lie in (0, 1], got {}", self.ess_threshold));
        }
        if !(0.0..1.0).contains(&self.min_acceptance) {
            return bad("min_acceptance", format!("must lie in [0, 1), got {}", self.min_acceptance));
        }
        Ok(())
    }
}
