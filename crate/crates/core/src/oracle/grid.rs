use rand::{Rng, RngCore};

use crate::error::{Result, SabcError};

/// Normalized one-dimensional density tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    /// Trapezoid cumulative mass at each grid node.
    pub cdf: Vec<f64>,
}

impl GridPosterior {
    /// Tabulates `exp(log_density)` on `points` nodes spanning `[lo, hi]`.
    pub fn new(lo: f64, hi: f64, points: usize, log_density: impl Fn(f64) -> f64) -> Result<Self> {
        assert!(points >= 2 && hi > lo);
        let h = (hi - lo) / (points - 1) as f64;
        let logs: Vec<f64> = (0..points).map(|k| log_density(lo + k as f64 * h)).collect();
        if let Some(k) = logs.iter().position(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(SabcError::Oracle(format!(
                "log-density {} at grid node {}",
                logs[k],
                lo + k as f64 * h
            )));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(SabcError::Oracle("density vanishes on the whole grid".into()));
        }
        let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let mut cdf = Vec::with_capacity(points);
        cdf.push(0.0);
        for w in raw.windows(2) {
            let last = *cdf.last().expect("non-empty");
            cdf.push(last + 0.5 * h * (w[0] + w[1]));
        }
        let total = *cdf.last().expect("non-empty");
        Ok(GridPosterior {
            lo,
            hi,
            density: raw.iter().map(|d| d / total).collect(),
            cdf: cdf.iter().map(|c| c / total).collect(),
        })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.density.len() - 1) as f64
    }

    /// Linearly interpolated density; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&x) {
            return 0.0;
        }
        let pos = (x - self.lo) / self.step();
        let k = (pos.floor() as usize).min(self.density.len() - 2);
        let t = pos - k as f64;
        self.density[k] * (1.0 - t) + self.density[k + 1] * t
    }

    /// Mass between `a` and `b` by the trapezoid rule on the grid nodes.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let h = self.step();
        (0..self.density.len() - 1)
            .filter(|&k| {
                let mid = self.lo + (k as f64 + 0.5) * h;
                mid >= a && mid < b
            })
            .map(|k| 0.5 * h * (self.density[k] + self.density[k + 1]))
            .sum()
    }

    /// Inverse-CDF draw, linear within grid cells.
    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + (k as f64 - 1.0 + t) * self.step()
    }

    pub fn mean(&self) -> f64 {
        let h = self.step();
        (0..self.density.len() - 1)
            .map(|k| {
                let (x0, x1) = (self.lo + k as f64 * h, self.lo + (k + 1) as f64 * h);
                0.5 * h * (x0 * self.density[k] + x1 * self.density[k + 1])
            })
            .sum()
    }
}

/// Total-variation distance between two tabulated densities, integrated on
/// the finer of the two grids.
pub fn tv_distance(a: &GridPosterior, b: &GridPosterior) -> f64 {
    let fine = if a.density.len() >= b.density.len() { a } else { b };
    let coarse = if std::ptr::eq(fine, a) { b } else { a };
    let h = fine.step();
    let diff: Vec<f64> = (0..fine.density.len())
        .map(|k| (fine.density[k] - coarse.density_at(fine.lo + k as f64 * h)).abs())
        .collect();
    0.5 * diff.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum::<f64>()
}
