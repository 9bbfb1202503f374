//! Serializable outcome of one sampler run.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// An energy density reached the numerical floor; the population is
    /// returned as it stood.
    ConvergedToFloor,
}

/// Per-sweep diagnostics. All vectors have one entry per sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    pub sweep: Vec<u64>,
    pub u: Vec<Vec<f64>>,
    pub beta_e: Vec<Vec<f64>>,
    pub accept_rate: Vec<f64>,
    /// Tolerance sequence, SMC-ABC only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

impl Trajectories {
    pub fn len(&self) -> usize {
        self.sweep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweep.is_empty()
    }

    pub fn push(&mut self, sweep: u64, u: Vec<f64>, beta_e: Vec<f64>, accept_rate: f64) {
        self.sweep.push(sweep);
        self.u.push(u);
        self.beta_e.push(beta_e);
        self.accept_rate.push(accept_rate);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLog {
    pub sweep: u64,
    /// Effective sample size of the importance weights before resampling.
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    /// Final population, one row per particle.
    pub posterior: Vec<Vec<f64>>,
    pub trajectories: Trajectories,
    pub simulator_calls: u64,
    pub simulator_failures: u64,
    pub jumps: Vec<JumpLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub status: Status,
    pub wall_clock_seconds: f64,
}

/// Snapshot handed to progress callbacks after each sweep.
#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub sweep: u64,
    pub u: &'a [f64],
    pub beta_e: &'a [f64],
    pub accept_rate: f64,
}
