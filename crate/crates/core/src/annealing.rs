//! Closed-form thermodynamics of the annealing schedule.
//!
//! Energies live on `[0, 1]` and are uniform under the prior. A population in
//! equilibrium at inverse temperature `beta` then has mean energy
//! `U(beta) = 1/beta - 1/(e^beta - 1)`, the mean of an exponential truncated to
//! the unit interval. The schedule inverts that relation to recover the
//! internal temperature of the population and adds the thermodynamic force
//! that keeps the energy densities on a minimal-entropy-production path.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};

/// Energy densities at or below this value end the annealing.
pub const U_FLOOR: f64 = 1e-12;

/// Largest statistic count whose coefficient fits in a `u64`.
pub const MAX_CATALAN_N: u32 = 30;

const SERIES_CUTOFF: f64 = 1e-2;

/// `(2n+2)! / ((n+1)! (n+2)!)`, i.e. the Catalan number `C_{n+1}`.
///
/// Panics for `n > MAX_CATALAN_N`.
pub fn catalan_coeff(n: u32) -> u64 {
    assert!(n <= MAX_CATALAN_N, "catalan_coeff: n = {n} exceeds {MAX_CATALAN_N}");
    // C_{k+1} = C_k * 2(2k+1) / (k+2), exact in u128
    let mut c: u128 = 1;
    for k in 0..=u128::from(n) {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c as u64
}

/// Mean energy of a population at inverse temperature `beta`.
pub fn u_of_beta(beta: f64) -> Result<f64> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(SabcError::InvalidBeta(beta));
    }
    Ok(mean_energy(beta))
}

fn mean_energy(beta: f64) -> f64 {
    if beta < SERIES_CUTOFF {
        // 1/2 - b/12 + b^3/720 - b^5/30240 + ...
        let b2 = beta * beta;
        0.5 - beta / 12.0 + beta * b2 / 720.0 - beta * b2 * b2 / 30240.0
    } else {
        1.0 / beta - 1.0 / beta.exp_m1()
    }
}

/// d U / d beta, i.e. minus the energy variance.
fn mean_energy_slope(beta: f64) -> f64 {
    if beta < 1e-3 {
        -1.0 / 12.0 + beta * beta / 240.0
    } else {
        let s = (0.5 * beta).sinh();
        -1.0 / (beta * beta) + 1.0 / (4.0 * s * s)
    }
}

/// Inverse temperature of a population with mean energy `u`.
///
/// Safeguarded Newton iteration inside the bracket `[0, 4/u]`; `u(4/u) < u`
/// holds because the mean energy never exceeds `1/beta`.
pub fn beta_of_u(u: f64) -> Result<f64> {
    if u.is_nan() || u > 0.5 {
        return Err(SabcError::EnergyAboveHalf(u));
    }
    if u <= U_FLOOR {
        return Err(SabcError::TemperatureOverflow { stat: 0, u });
    }
    if u == 0.5 {
        return Ok(0.0);
    }

    let mut lo = 0.0;
    let mut hi = 4.0 / u;
    // 1/u is the large-beta asymptote; 12 (0.5 - u) the small-beta one
    let mut beta = if u < 0.25 { 1.0 / u } else { 12.0 * (0.5 - u) };
    for _ in 0..200 {
        let residual = mean_energy(beta) - u;
        if residual == 0.0 {
            return Ok(beta);
        }
        // mean_energy decreases in beta
        if residual > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - residual / mean_energy_slope(beta);
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - beta).abs() <= 1e-15 * (1.0 + beta) || hi - lo <= 1e-15 * (1.0 + hi) {
            return Ok(next);
        }
        beta = next;
    }
    Ok(beta)
}

/// Single temperature shared by all statistics, or one per statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Single,
    Multi,
}

/// Parameters of the adaptive annealing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    /// Annealing velocity.
    pub v: f64,
    pub n_stats: usize,
    /// Catalan coefficient for the statistic count the force is evaluated on:
    /// `n_stats` in multi mode, 1 in single mode.
    pub c_n: f64,
}

impl Schedule {
    pub fn new(mode: ScheduleMode, v: f64, n_stats: usize) -> Result<Self> {
        if !v.is_finite() || v < 0.0 {
            return Err(SabcError::Config(format!(
                "annealing velocity must be finite and >= 0, got {v}"
            )));
        }
        if n_stats == 0 || n_stats > MAX_CATALAN_N as usize {
            return Err(SabcError::Config(format!(
                "statistic count must be in 1..={MAX_CATALAN_N}, got {n_stats}"
            )));
        }
        let effective = match mode {
            ScheduleMode::Single => 1,
            ScheduleMode::Multi => n_stats as u32,
        };
        Ok(Schedule {
            mode,
            v,
            n_stats,
            c_n: catalan_coeff(effective) as f64,
        })
    }
}

/// External and internal inverse temperatures together with the energy
/// densities they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureState {
    pub beta_e: Vec<f64>,
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
}

impl TemperatureState {
    /// Infinite-temperature state for `n` statistics.
    pub fn hot(n: usize) -> Self {
        TemperatureState {
            beta_e: vec![0.0; n],
            beta: vec![0.0; n],
            u: vec![0.5; n],
        }
    }
}

fn check_density(stat: usize, u: f64) -> Result<()> {
    if u.is_nan() || u > 0.5 {
        return Err(SabcError::EnergyAboveHalf(u));
    }
    if u <= U_FLOOR {
        return Err(SabcError::TemperatureOverflow { stat, u });
    }
    Ok(())
}

/// Thermodynamic force on statistic `i` along the geodesic through `u`.
///
/// Equivalent to `v (1 + sum_j (U_j/U_i)^{n/2}) / (c_n (n+1) U_i^{1+n/2} prod_j (U_j/U_i))`,
/// rewritten as `v (U_i^{n/2} + sum_j U_j^{n/2}) / (c_n (n+1) U_i prod_j U_j)` and
/// evaluated in log space; the product over eleven small densities underflows
/// otherwise.
fn force(schedule: &Schedule, u: &[f64], i: usize) -> f64 {
    if schedule.v == 0.0 {
        return 0.0;
    }
    let n = u.len() as f64;
    let half = 0.5 * n;
    let logs: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let powers = logs.iter().map(|&l| half * l).chain(std::iter::once(half * logs[i]));
    let max = powers.clone().fold(f64::NEG_INFINITY, f64::max);
    let log_numer = max + powers.map(|p| (p - max).exp()).sum::<f64>().ln();
    let log_denom = schedule.c_n.ln() + (n + 1.0).ln() + logs[i] + logs.iter().sum::<f64>();
    schedule.v * (log_numer - log_denom).exp()
}

/// Per-statistic external inverse temperatures for the multi-temperature
/// schedule.
pub fn update_beta_e_multi(schedule: &Schedule, u: &[f64]) -> Result<Vec<f64>> {
    if schedule.mode != ScheduleMode::Multi {
        return Err(SabcError::Config("multi-temperature update on a single schedule".into()));
    }
    if u.len() != schedule.n_stats {
        return Err(SabcError::DimensionMismatch {
            expected: schedule.n_stats,
            got: u.len(),
        });
    }
    for (stat, &x) in u.iter().enumerate() {
        check_density(stat, x)?;
    }
    (0..u.len())
        .map(|i| {
            let beta = beta_of_u(u[i])?;
            let out = beta + force(schedule, u, i);
            if out.is_finite() {
                Ok(out)
            } else {
                Err(SabcError::TemperatureOverflow { stat: i, u: u[i] })
            }
        })
        .collect()
}

/// Shared external inverse temperature for the single-temperature schedule,
/// driven by the statistic-averaged energy density.
pub fn update_beta_e_single(schedule: &Schedule, u_total: f64) -> Result<f64> {
    if schedule.mode != ScheduleMode::Single {
        return Err(SabcError::Config("single-temperature update on a multi schedule".into()));
    }
    check_density(0, u_total)?;
    let beta = beta_of_u(u_total)?;
    let out = beta + schedule.v / schedule.c_n * u_total.powf(-1.5);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(SabcError::TemperatureOverflow { stat: 0, u: u_total })
    }
}

/// Linear-response (Onsager) matrix relating energy fluxes to forces.
pub fn onsager_matrix(u: &[f64], c_n: f64) -> DMatrix<f64> {
    let n = u.len();
    let prod: f64 = u.iter().product();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { (n + 1) as f64 } else { 0.0 };
        -c_n * prod * u[i] * u[j] * (delta - 1.0)
    })
}

/// Riemannian metric on energy space, the negative inverse of
/// [`onsager_matrix`].
pub fn metric(u: &[f64], c_n: f64) -> DMatrix<f64> {
    let n = u.len();
    let prod: f64 = u.iter().product();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta + 1.0) / (c_n * (n + 1) as f64 * u[i] * u[j] * prod)
    })
}

/// Energy densities at time `t` on the diagonal geodesic starting at `u0`.
pub fn geodesic_u(t: f64, u0: &[f64], v: f64, n: usize) -> Vec<f64> {
    let n = n as f64;
    let factor = (0.5 * v * n * t + 1.0).powf(-2.0 / n);
    u0.iter().map(|&x| x * factor).collect()
}

/// Time derivative of [`geodesic_u`], expressed through the current densities.
pub fn geodesic_rate(u: &[f64], u0: &[f64], v: f64, n: usize) -> Vec<f64> {
    let half = 0.5 * n as f64;
    u.iter()
        .zip(u0)
        .map(|(&x, &x0)| -v * x0.powf(-half) * x.powf(1.0 + half))
        .collect()
}
