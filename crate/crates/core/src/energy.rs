//! Rectification of per-statistic distances into energies.
//!
//! Each summary statistic gets its own table of prior-sample distances. The
//! energy of a distance is its rank within that table, normalized to `[0, 1]`
//! and interpolated linearly between neighbouring table entries, so that
//! under the prior every energy is (approximately) uniformly distributed.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};

/// Frozen per-statistic empirical-CDF tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct EnergyTransform {
    tables: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    tables: Vec<Vec<f64>>,
}

impl From<EnergyTransform> for RawTransform {
    fn from(t: EnergyTransform) -> Self {
        RawTransform { tables: t.tables }
    }
}

impl TryFrom<RawTransform> for EnergyTransform {
    type Error = SabcError;

    fn try_from(raw: RawTransform) -> Result<Self> {
        EnergyTransform::from_tables(raw.tables)
    }
}

impl EnergyTransform {
    /// Builds the tables from a prior sample of distance vectors, one row per
    /// sample and one column per statistic.
    pub fn build(prior_distances: &[Vec<f64>]) -> Result<Self> {
        let n_samples = prior_distances.len();
        if n_samples < 2 {
            return Err(SabcError::TooFewSamples(n_samples));
        }
        let n_stats = prior_distances[0].len();
        if n_stats == 0 {
            return Err(SabcError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }

        let mut tables = vec![Vec::with_capacity(n_samples); n_stats];
        for (sample, row) in prior_distances.iter().enumerate() {
            if row.len() != n_stats {
                return Err(SabcError::DimensionMismatch {
                    expected: n_stats,
                    got: row.len(),
                });
            }
            for (stat, &value) in row.iter().enumerate() {
                if !value.is_finite() {
                    return Err(SabcError::NonFiniteDistance {
                        stat,
                        sample,
                        value,
                    });
                }
                if value < 0.0 {
                    return Err(SabcError::NegativeDistance {
                        stat,
                        sample,
                        value,
                    });
                }
                tables[stat].push(value);
            }
        }
        for table in &mut tables {
            table.sort_by(f64::total_cmp);
        }
        Ok(EnergyTransform { tables })
    }

    /// Reconstructs a transform from already-sorted tables, as read back from a
    /// run record.
    pub fn from_tables(tables: Vec<Vec<f64>>) -> Result<Self> {
        let len = tables.first().map_or(0, Vec::len);
        if tables.is_empty() {
            return Err(SabcError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if len < 2 {
            return Err(SabcError::TooFewSamples(len));
        }
        for (stat, table) in tables.iter().enumerate() {
            if table.len() != len {
                return Err(SabcError::DimensionMismatch {
                    expected: len,
                    got: table.len(),
                });
            }
            for (sample, &value) in table.iter().enumerate() {
                if !value.is_finite() {
                    return Err(SabcError::NonFiniteDistance {
                        stat,
                        sample,
                        value,
                    });
                }
            }
            if table.windows(2).any(|w| w[0] > w[1]) {
                return Err(SabcError::Config(format!(
                    "energy table for statistic {stat} is not sorted"
                )));
            }
        }
        Ok(EnergyTransform { tables })
    }

    pub fn n_stats(&self) -> usize {
        self.tables.len()
    }

    /// Number of prior samples behind every table.
    pub fn table_len(&self) -> usize {
        self.tables[0].len()
    }

    pub fn table(&self, stat: usize) -> &[f64] {
        &self.tables[stat]
    }

    /// Energy of distance `rho` for statistic `stat` (zero-based).
    pub fn to_energy(&self, stat: usize, rho: f64) -> Result<f64> {
        let table = self.tables.get(stat).ok_or(SabcError::StatIndex {
            index: stat,
            n_stats: self.tables.len(),
        })?;
        if rho.is_nan() {
            return Err(SabcError::NanDistance);
        }
        Ok(ramp(table, rho))
    }

    /// Like [`to_energy`](Self::to_energy), but a distance that lands exactly
    /// on a run of tied table entries is spread over the run's rank interval
    /// by `tie` in `[0, 1]`. With `tie` uniform this is the randomized
    /// probability integral transform, which keeps energies uniform under the
    /// prior for discrete statistics.
    pub fn to_energy_tied(&self, stat: usize, rho: f64, tie: f64) -> Result<f64> {
        let table = self.tables.get(stat).ok_or(SabcError::StatIndex {
            index: stat,
            n_stats: self.tables.len(),
        })?;
        if rho.is_nan() {
            return Err(SabcError::NanDistance);
        }
        let first = table.partition_point(|&r| r < rho);
        let end = table.partition_point(|&r| r <= rho);
        if end > first + 1 {
            let scale = (table.len() - 1) as f64;
            return Ok((first as f64 + tie * (end - 1 - first) as f64) / scale);
        }
        Ok(ramp(table, rho))
    }

    /// Componentwise [`to_energy_tied`](Self::to_energy_tied) with fresh
    /// uniform tie-breakers drawn from `rng`.
    pub fn to_energy_vector_tied(&self, rhos: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        if rhos.len() != self.tables.len() {
            return Err(SabcError::DimensionMismatch {
                expected: self.tables.len(),
                got: rhos.len(),
            });
        }
        rhos.iter()
            .enumerate()
            .map(|(stat, &rho)| self.to_energy_tied(stat, rho, rng.random::<f64>()))
            .collect()
    }

    /// Componentwise [`to_energy`](Self::to_energy).
    pub fn to_energy_vector(&self, rhos: &[f64]) -> Result<Vec<f64>> {
        if rhos.len() != self.tables.len() {
            return Err(SabcError::DimensionMismatch {
                expected: self.tables.len(),
                got: rhos.len(),
            });
        }
        rhos.iter()
            .enumerate()
            .map(|(stat, &rho)| self.to_energy(stat, rho))
            .collect()
    }
}

/// Piecewise-linear empirical CDF over a sorted table.
///
/// Table entry `k` maps to `k / (N - 1)`, where `k` counts entries strictly
/// below it; a run of duplicates is therefore a vertical step whose left edge
/// uses the first index of the run and whose right edge uses the last.
fn ramp(table: &[f64], rho: f64) -> f64 {
    let n = table.len();
    let last = table[n - 1];
    if rho <= table[0] {
        return 0.0;
    }
    if rho >= last {
        return 1.0;
    }
    let scale = (n - 1) as f64;
    // first index with table[idx] >= rho; 1 <= idx <= n - 1 here
    let idx = table.partition_point(|&r| r < rho);
    let hi = table[idx];
    if hi == rho {
        return idx as f64 / scale;
    }
    let lo = table[idx - 1];
    let frac = (rho - lo) / (hi - lo);
    ((idx - 1) as f64 + frac) / scale
}
