//! Simulated-annealing approximate Bayesian computation.
//!
//! Per-statistic distances are rectified into energies that are uniform under
//! the prior, and a population of particles is cooled along an adaptive
//! schedule with one temperature per statistic (or one shared temperature).

pub mod annealing;
pub mod config;
pub mod energy;
pub mod error;
pub mod oracle;
pub mod record;
pub mod sampler;
pub mod tasks;
pub mod verify;

pub use annealing::{Schedule, ScheduleMode, TemperatureState};
pub use config::{Algorithm, Driver, KernelKind, RunConfig};
pub use energy::EnergyTransform;
pub use error::{Result, SabcError};
pub use record::{Progress, RunRecord, Status, Trajectories};
pub use sampler::{run, run_sabc, run_smcabc, Particle, Population, ProposalKernel, Sabc};
pub use tasks::{task_by_name, Task};
