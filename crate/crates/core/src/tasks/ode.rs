//! Adaptive Dormand-Prince 5(4) integration with output at fixed times.

use crate::error::{Result, SabcError};

/// Integrator tolerances and step limits.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-6,
            atol: 1e-6,
            max_steps: 100_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0` and records the state at each of the
/// increasing `times` (all `>= t0`).
pub fn integrate<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    tol: Tolerances,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut out = Vec::with_capacity(times.len());

    let span = times.last().map_or(0.0, |&t_end| t_end - t0);
    let mut h = if span > 0.0 { span * 1e-3 } else { 1e-3 };
    let mut steps = 0;

    f(t, &y, &mut k[0]);
    for &target in times {
        while t < target {
            if steps >= tol.max_steps {
                return Err(SabcError::Simulation {
                    particle: 0,
                    reason: format!("ODE step limit reached at t = {t}"),
                });
            }
            steps += 1;
            let h_try = h.min(target - t);
            for s in 1..7 {
                for d in 0..dim {
                    stage[d] = y[d] + h_try * (0..s).map(|j| A[s][j] * k[j][d]).sum::<f64>();
                }
                f(t + C[s] * h_try, &stage, &mut k[s]);
            }
            // stage 6 evaluated the fifth-order solution (FSAL)
            y_new.copy_from_slice(&stage);
            let mut err: f64 = 0.0;
            for d in 0..dim {
                let e = h_try * (0..7).map(|j| E[j] * k[j][d]).sum::<f64>();
                let scale = tol.atol + tol.rtol * y[d].abs().max(y_new[d].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() {
                return Err(SabcError::Simulation {
                    particle: 0,
                    reason: format!("non-finite ODE state at t = {t}"),
                });
            }
            if err <= 1.0 {
                t = if h_try == target - t { target } else { t + h_try };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 && h_try < h {
                // step was clipped to an output time; keep the proposed size
            } else {
                h = h_try * factor;
            }
            if h < 1e-12 * (1.0 + t.abs()) {
                return Err(SabcError::Simulation {
                    particle: 0,
                    reason: format!("ODE step size underflow at t = {t}"),
                });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
