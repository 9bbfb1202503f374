//! Two-sample discrepancies between a posterior sample and a reference.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SabcError};

/// Points per sample used for the median-heuristic bandwidth.
const BANDWIDTH_POINTS: usize = 1000;
const FOLDS: usize = 5;
const C2ST_SHUFFLE_SEED: u64 = 0x2C57;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(SabcError::Oracle("two-sample metric needs non-empty samples".into()));
    }
    let d = x[0].len();
    for row in x.iter().chain(y) {
        if row.len() != d {
            return Err(SabcError::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }
    Ok(d)
}

fn cmp_samples(x: &[Vec<f64>], y: &[Vec<f64>]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        for (p, q) in a.iter().zip(b) {
            match p.total_cmp(q) {
                Ordering::Equal => {}
                other => return other,
            }
        }
    }
    x.len().cmp(&y.len())
}

fn strided(x: &[Vec<f64>], max: usize) -> impl Iterator<Item = &Vec<f64>> {
    let stride = x.len().div_ceil(max).max(1);
    x.iter().step_by(stride)
}

/// Median pairwise distance over a strided subsample of the pooled sample.
pub fn median_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = strided(x, BANDWIDTH_POINTS)
        .chain(strided(y, BANDWIDTH_POINTS))
        .collect();
    let mut d: Vec<f64> = (0..pooled.len())
        .flat_map(|i| {
            let pooled = &pooled;
            (i + 1..pooled.len()).map(move |j| sq_dist(pooled[i], pooled[j]))
        })
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let h = m.sqrt();
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], inv_two_h2: f64) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|p| b.iter().map(|q| (-sq_dist(p, q) * inv_two_h2).exp()).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() / (a.len() as f64 * b.len() as f64)
}

/// Squared maximum mean discrepancy (biased V-statistic) with a Gaussian
/// kernel whose bandwidth is the pooled median pairwise distance.
///
/// Exactly symmetric in its arguments.
pub fn mmd(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    check_dims(x, y)?;
    let (x, y) = if cmp_samples(x, y) == Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    };
    let h = median_bandwidth(x, y);
    let inv = 1.0 / (2.0 * h * h);
    let value = mean_kernel(x, x, inv) + mean_kernel(y, y, inv) - 2.0 * mean_kernel(x, y, inv);
    Ok(value.max(0.0))
}

/// Cross-validated k-nearest-neighbour accuracy at telling `x` from `y`.
///
/// Coordinates are standardized with the pooled mean and deviation, folds
/// come from a fixed shuffle, and `k = floor(sqrt(training size))`. A tied
/// vote goes to the nearest neighbour's label.
pub fn c2st(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let d = check_dims(x, y)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    if (nx - ny).abs() > 0.01 * nx.max(ny) {
        return Err(SabcError::Oracle(format!(
            "classifier test needs samples of equal size, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() + y.len() < 2 * FOLDS {
        return Err(SabcError::Oracle("classifier test needs at least 10 points".into()));
    }
    let pooled: Vec<(&Vec<f64>, bool)> = x.iter().map(|p| (p, false)).chain(y.iter().map(|p| (p, true))).collect();
    let n = pooled.len();
    let mut mean = vec![0.0; d];
    for (p, _) in &pooled {
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v / n as f64;
        }
    }
    let mut sd = vec![0.0; d];
    for (p, _) in &pooled {
        for k in 0..d {
            sd[k] += (p[k] - mean[k]).powi(2) / n as f64;
        }
    }
    let sd: Vec<f64> = sd.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let data: Vec<(Vec<f64>, bool)> = pooled
        .iter()
        .map(|(p, label)| ((0..d).map(|k| (p[k] - mean[k]) / sd[k]).collect(), *label))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(C2ST_SHUFFLE_SEED));
    let mut correct = 0usize;
    for f in 0..FOLDS {
        let (lo, hi) = (f * n / FOLDS, (f + 1) * n / FOLDS);
        let test = &order[lo..hi];
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let k = ((train.len() as f64).sqrt().floor() as usize).max(1);
        correct += test
            .par_iter()
            .map_init(
                || Vec::with_capacity(train.len()),
                |dist: &mut Vec<(f64, usize)>, &t| {
                    dist.clear();
                    dist.extend(train.iter().map(|&j| (sq_dist(&data[t].0, &data[j].0), j)));
                    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                    dist.select_nth_unstable_by(k - 1, cmp);
                    let neighbours = &dist[..k];
                    let votes = neighbours.iter().filter(|(_, j)| data[*j].1).count();
                    let predicted = match (2 * votes).cmp(&k) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => {
                            let nearest = neighbours.iter().min_by(|a, b| cmp(a, b)).expect("k >= 1");
                            data[nearest.1].1
                        }
                    };
                    usize::from(predicted == data[t].1)
                },
            )
            .sum::<usize>();
    }
    Ok(correct as f64 / n as f64)
}
