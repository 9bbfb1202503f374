//! Reference posteriors for the benchmark tasks and the metrics that compare
//! sampler output against them.

mod grid;
mod metrics;
mod mh;

use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};
use crate::sampler::{master_stream, slot_stream};
use crate::tasks::Task;

pub use grid::{tv_distance, GridPosterior};
pub use metrics::{c2st, median_bandwidth, mmd};
pub use mh::{mh_chains, split_rhat, MhSettings};

/// Draws kept in a reference sample.
pub const REFERENCE_SIZE: usize = 10_000;
/// Nodes of the one-dimensional posterior grid.
pub const GRID_POINTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Grid1d,
    GridMh,
    Analytic,
    RejectionAbc,
}

impl OracleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMethod::Grid1d => "grid1d",
            OracleMethod::GridMh => "grid-mh",
            OracleMethod::Analytic => "analytic",
            OracleMethod::RejectionAbc => "rejection-abc",
        }
    }

    /// Method used for the reference posterior of a built-in task.
    pub fn for_task(task: &str) -> Result<Self> {
        Ok(match task {
            "distractors" => OracleMethod::Grid1d,
            "hyperboloid" | "sir" => OracleMethod::GridMh,
            "gmm" => OracleMethod::Analytic,
            "two_moons" => OracleMethod::RejectionAbc,
            other => return Err(SabcError::UnknownTask(other.to_string())),
        })
    }
}

/// Reference posterior draws, one row per draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub task: String,
    pub method: OracleMethod,
    pub seed: u64,
    pub samples: Vec<Vec<f64>>,
}

/// Every `len / m`-th row, so at most `m` rows.
pub fn thin(rows: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    if rows.len() <= m {
        return rows.to_vec();
    }
    (0..m).map(|k| rows[k * rows.len() / m].clone()).collect()
}

/// Tabulates the exact posterior of a scalar-parameter task on `grid` nodes
/// over its prior support and draws `m` samples by inverse CDF.
pub fn grid_posterior_1d(task: &dyn Task, grid: usize, m: usize, seed: u64) -> Result<OracleSample> {
    let g = grid_density(task, grid)?;
    let mut rng = master_stream(seed);
    Ok(OracleSample {
        task: task.name().to_string(),
        method: OracleMethod::Grid1d,
        seed,
        samples: (0..m).map(|_| vec![g.sample(&mut rng)]).collect(),
    })
}

/// Exact posterior density of a scalar-parameter task on a grid.
pub fn grid_density(task: &dyn Task, grid: usize) -> Result<GridPosterior> {
    if task.dim_theta() != 1 {
        return Err(SabcError::Oracle(format!(
            "grid posterior needs a scalar parameter, `{}` has {}",
            task.name(),
            task.dim_theta()
        )));
    }
    let (lo, hi) = task.prior_support()[0];
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(SabcError::Oracle("grid posterior needs a bounded prior".into()));
    }
    if task.log_likelihood(&[lo]).is_none() {
        return Err(SabcError::Oracle(format!("task `{}` has no tractable likelihood", task.name())));
    }
    GridPosterior::new(lo, hi, grid, |x| {
        let theta = [x];
        task.prior_log_density(&theta) + task.log_likelihood(&theta).unwrap_or(f64::NAN)
    })
}

/// Pooled post-warmup Metropolis draws, thinned to `m`.
pub fn mh_posterior(task: &dyn Task, settings: &MhSettings, m: usize, seed: u64) -> Result<OracleSample> {
    let chains = mh_chains(task, settings, seed)?;
    let pooled: Vec<Vec<f64>> = chains.into_iter().flatten().collect();
    Ok(OracleSample {
        task: task.name().to_string(),
        method: OracleMethod::GridMh,
        seed,
        samples: thin(&pooled, m),
    })
}

/// Exact draws from the Gaussian-mixture posterior at observation `s_obs`:
/// an equal mixture of `N(s_obs, I)` and `N(s_obs, 0.01 I)` truncated to the
/// prior box `[-10, 10]^2`.
pub fn gmm_posterior(s_obs: &[f64], m: usize, seed: u64) -> OracleSample {
    let mut rng = master_stream(seed);
    let mut samples = Vec::with_capacity(m);
    while samples.len() < m {
        let sd = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { 0.1 };
        let theta: Vec<f64> = s_obs
            .iter()
            .map(|&s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s + sd * z
            })
            .collect();
        if theta.iter().all(|t| t.abs() <= 10.0) {
            samples.push(theta);
        }
    }
    OracleSample {
        task: "gmm".into(),
        method: OracleMethod::Analytic,
        seed,
        samples,
    }
}

/// Keeps the `keep` prior draws whose simulations fall closest to the
/// observation, out of `keep / quantile` simulations.
pub fn rejection_abc(task: &dyn Task, keep: usize, quantile: f64, seed: u64) -> Result<OracleSample> {
    const CHUNK: usize = 1 << 20;
    let total = (keep as f64 / quantile).ceil() as usize;
    let chunks = total.div_ceil(CHUNK);
    let best_of = |chunk: usize| -> Result<Vec<(f64, Vec<f64>)>> {
        let mut rng = slot_stream(seed, chunk);
        let count = CHUNK.min(total - chunk * CHUNK);
        let mut kept: Vec<(f64, Vec<f64>)> = Vec::with_capacity(2 * keep);
        for _ in 0..count {
            let theta = task.prior_sample(&mut rng as &mut dyn RngCore);
            let rho = task.simulate_distances(&theta, &mut rng)?;
            let d = rho.iter().map(|r| r * r).sum::<f64>();
            kept.push((d, theta));
            if kept.len() == 2 * keep {
                kept.select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0));
                kept.truncate(keep);
            }
        }
        Ok(kept)
    };
    let mut all: Vec<(f64, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(best_of)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if all.len() < keep {
        return Err(SabcError::Oracle("rejection reference kept too few draws".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(keep);
    Ok(OracleSample {
        task: task.name().to_string(),
        method: OracleMethod::RejectionAbc,
        seed,
        samples: all.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Reference posterior of a built-in task with `m` draws.
pub fn reference_posterior(task: &dyn Task, m: usize, seed: u64) -> Result<OracleSample> {
    match OracleMethod::for_task(task.name())? {
        OracleMethod::Grid1d => grid_posterior_1d(task, GRID_POINTS, m, seed),
        OracleMethod::GridMh => mh_posterior(task, &MhSettings::default(), m, seed),
        OracleMethod::Analytic => Ok(gmm_posterior(task.observed(), m, seed)),
        OracleMethod::RejectionAbc => rejection_abc(task, m.max(REFERENCE_SIZE), 1e-4, seed)
            .map(|mut o| {
                o.samples.truncate(m);
                o
            }),
    }
}

/// On-disk store of reference samples keyed by task, seed and method.
#[derive(Debug, Clone)]
pub struct OracleCache {
    dir: PathBuf,
}

impl OracleCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        OracleCache {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn path(&self, task: &str, seed: u64, method: OracleMethod) -> PathBuf {
        self.dir.join(format!("{task}-{}-{seed}.json", method.as_str()))
    }

    /// Loads the cached reference, or computes and stores it. A cached
    /// sample with fewer than `m` draws is recomputed.
    pub fn get_or_compute(&self, task: &dyn Task, m: usize, seed: u64) -> Result<OracleSample> {
        let method = OracleMethod::for_task(task.name())?;
        let path = self.path(task.name(), seed, method);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(cached) = serde_json::from_str::<OracleSample>(&text) {
                if cached.samples.len() >= m {
                    return Ok(OracleSample {
                        samples: cached.samples[..m].to_vec(),
                        ..cached
                    });
                }
            }
        }
        let fresh = reference_posterior(task, m, seed)?;
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&fresh)?)?;
        fs::rename(&tmp, &path)?;
        Ok(fresh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{task_by_name, DistractorTask, GmmTask, HyperboloidTask, TwoMoonsTask};

    fn coord_means(samples: &[Vec<f64>]) -> Vec<f64> {
        let d = samples[0].len();
        (0..d)
            .map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64)
            .collect()
    }

    #[test]
    fn distractor_grid_has_imbalanced_modes_at_plus_minus_five() {
        let task = DistractorTask::new();
        let g = grid_density(&task, GRID_POINTS).unwrap();
        let left = g.mass_between(-10.0, 0.0);
        let right = g.mass_between(0.0, 10.0);
        // Gaussian-product masses of the two dominant terms: both narrow
        // components near -5, both broad ones near +5
        let narrow = 0.7f64.powi(2) / (2.0 * std::f64::consts::PI.sqrt() * 0.3);
        let broad = 0.3f64.powi(2) / (2.0 * std::f64::consts::PI.sqrt());
        assert!((left / right - narrow / broad).abs() / (narrow / broad) < 1e-3, "{}", left / right);
        let argmax = |lo: f64, hi: f64| {
            let h = g.step();
            (0..g.density.len())
                .filter(|&k| (lo..hi).contains(&(g.lo + k as f64 * h)))
                .max_by(|&a, &b| g.density[a].total_cmp(&g.density[b]))
                .map(|k| g.lo + k as f64 * h)
                .unwrap()
        };
        assert!((argmax(-10.0, 0.0) + 5.0).abs() < 0.05);
        assert!((argmax(0.0, 10.0) - 5.0).abs() < 0.05);
    }

    #[test]
    fn distractor_grid_is_refinement_stable() {
        let task = DistractorTask::new();
        let a = grid_density(&task, GRID_POINTS).unwrap();
        let b = grid_density(&task, 2 * GRID_POINTS).unwrap();
        let fine = grid_density(&task, 10 * GRID_POINTS).unwrap();
        assert!(tv_distance(&a, &b) < 1e-4);
        assert!(tv_distance(&a, &fine) < 1e-4);
    }

    #[test]
    fn grid_needs_scalar_tractable_task() {
        assert!(grid_density(&GmmTask::new(), 100).is_err());
        assert!(grid_density(&TwoMoonsTask::new(), 100).is_err());
    }

    #[test]
    fn gmm_posterior_is_symmetric_about_origin() {
        let o = gmm_posterior(&[0.0, 0.0], REFERENCE_SIZE, 1);
        let sd = (0.5f64 * (1.0 + 0.01)).sqrt();
        for m in coord_means(&o.samples) {
            assert!(m.abs() < 3.0 * sd / (REFERENCE_SIZE as f64).sqrt());
        }
    }

    #[test]
    fn gmm_metropolis_agrees_with_analytic() {
        let task = GmmTask::new();
        let chains = mh_chains(&task, &MhSettings::default(), 3).unwrap();
        // chain means give an autocorrelation-robust standard error
        for k in 0..2 {
            let means: Vec<f64> = chains
                .iter()
                .map(|c| c.iter().map(|t| t[k]).sum::<f64>() / c.len() as f64)
                .collect();
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
            assert!(m.abs() < 3.0 * sd / (means.len() as f64).sqrt() + 1e-3, "{m}");
        }
        let pooled: Vec<Vec<f64>> = chains.into_iter().flatten().collect();
        let mh = thin(&pooled, 4000);
        let exact = gmm_posterior(&[0.0, 0.0], 4000, 4).samples;
        assert!(mmd(&mh, &exact).unwrap() < 0.01);
    }

    #[test]
    fn hyperboloid_reference_is_multimodal_and_reproducible() {
        let task = HyperboloidTask::new();
        let a = mh_posterior(&task, &MhSettings::default(), REFERENCE_SIZE, 1).unwrap();
        let b = mh_posterior(&task, &MhSettings::default(), REFERENCE_SIZE, 2).unwrap();
        assert!(histogram_peaks(&a.samples, 24) >= 2);
        let (sa, sb) = (thin(&a.samples, 4000), thin(&b.samples, 4000));
        assert!(mmd(&sa, &sb).unwrap() < 0.01);
        assert!(c2st(&sa, &sb).unwrap() < 0.55);
    }

    /// Local maxima of a 2-D histogram over `[-2, 2]^2` holding at least a
    /// fifth of the tallest bin.
    fn histogram_peaks(samples: &[Vec<f64>], bins: usize) -> usize {
        let mut h = vec![vec![0usize; bins]; bins];
        for s in samples {
            let idx = |x: f64| (((x + 2.0) / 4.0 * bins as f64) as usize).min(bins - 1);
            h[idx(s[0])][idx(s[1])] += 1;
        }
        let top = h.iter().flatten().copied().max().unwrap();
        let mut peaks = 0;
        for i in 0..bins {
            for j in 0..bins {
                let v = h[i][j];
                if 5 * v < top {
                    continue;
                }
                let mut is_peak = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= bins as i64 || b >= bins as i64 {
                            continue;
                        }
                        let w = h[a as usize][b as usize];
                        // ties broken towards the lexicographically first bin
                        if w > v || (w == v && (a, b) < (i as i64, j as i64)) {
                            is_peak = false;
                        }
                    }
                }
                peaks += usize::from(is_peak);
            }
        }
        peaks
    }

    #[test]
    fn two_moons_rejection_reference() {
        let task = TwoMoonsTask::new();
        let o = rejection_abc(&task, 1000, 1e-3, 5).unwrap();
        assert_eq!(o.samples.len(), 1000);
        // observation at the origin forces theta_1 + theta_2 near zero
        // (up to the crescent radius) for every kept draw
        for t in &o.samples {
            assert!((t[0] + t[1]).abs() < 0.5, "{t:?}");
        }
    }

    #[test]
    fn sir_reference_concentrates_near_truth() {
        let task = task_by_name("sir").unwrap();
        let settings = MhSettings {
            chains: 4,
            length: 4000,
            warmup: 2000,
            max_rhat: 1.05,
        };
        let o = mh_posterior(&*task, &settings, 4000, 1).unwrap();
        let means = coord_means(&o.samples);
        assert!((means[0] - 0.4).abs() < 0.05, "{means:?}");
        assert!((means[1] - 0.125).abs() < 0.02, "{means:?}");
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = OracleCache::new(dir.path());
        let task = GmmTask::new();
        let a = cache.get_or_compute(&task, 500, 9).unwrap();
        assert!(cache.path("gmm", 9, OracleMethod::Analytic).exists());
        let b = cache.get_or_compute(&task, 300, 9).unwrap();
        assert_eq!(&a.samples[..300], &b.samples[..]);
    }

    #[test]
    fn thinning() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert_eq!(thin(&rows, 5), vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0], vec![8.0]]);
        assert_eq!(thin(&rows, 20).len(), 10);
    }
}
