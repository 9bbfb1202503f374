use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::resample::sample_covariance;
use super::Particle;
use crate::config::KernelKind;
use crate::error::{Result, SabcError};

/// Symmetric parameter-space proposal.
#[derive(Debug, Clone)]
pub struct ProposalKernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub jitter: f64,
    /// Lower Cholesky factor of the random-walk covariance.
    chol: Option<DMatrix<f64>>,
}

impl ProposalKernel {
    /// `2.38 / sqrt(2 d)`.
    pub fn default_gamma(dim: usize) -> f64 {
        2.38 / (2.0 * dim as f64).sqrt()
    }

    pub fn differential_evolution(gamma: f64, jitter: f64) -> Self {
        ProposalKernel {
            kind: KernelKind::DifferentialEvolution,
            gamma,
            jitter,
            chol: None,
        }
    }

    /// Random walk with the given covariance.
    pub fn gaussian(cov: &DMatrix<f64>) -> Result<Self> {
        let mut k = ProposalKernel {
            kind: KernelKind::GaussianRandomWalk,
            gamma: 0.0,
            jitter: 0.0,
            chol: None,
        };
        k.set_covariance(cov)?;
        Ok(k)
    }

    pub fn new(kind: KernelKind, gamma: f64, jitter: f64) -> Self {
        ProposalKernel {
            kind,
            gamma,
            jitter,
            chol: None,
        }
    }

    pub fn set_covariance(&mut self, cov: &DMatrix<f64>) -> Result<()> {
        let d = cov.nrows();
        let scale = (0..d).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        // escalating ridge for rank-deficient populations
        for ridge in [0.0, 1e-12, 1e-9, 1e-6, 1e-3] {
            let m = cov + DMatrix::identity(d, d) * (ridge * scale);
            if let Some(c) = m.cholesky() {
                self.chol = Some(c.l());
                return Ok(());
            }
        }
        Err(SabcError::Config("random-walk covariance is not positive definite".into()))
    }

    /// Random-walk covariance currently in use, if any.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|l| l * l.transpose())
    }

    /// Refits the random-walk covariance to `2 gamma^2 Cov(theta) + jitter^2 I`,
    /// the covariance the differential-evolution move would have. No-op for
    /// the differential-evolution kind.
    pub fn adapt(&mut self, particles: &[Particle]) -> Result<()> {
        if self.kind != KernelKind::GaussianRandomWalk {
            return Ok(());
        }
        let thetas: Vec<Vec<f64>> = particles.iter().map(|p| p.theta.clone()).collect();
        let d = thetas[0].len();
        let cov = sample_covariance(&thetas) * (2.0 * self.gamma * self.gamma)
            + DMatrix::identity(d, d) * (self.jitter * self.jitter);
        self.set_covariance(&cov)
    }

    /// Proposes a move away from `theta`.
    ///
    /// Differential-evolution partners are two distinct members of `pool`,
    /// skipping slot `exclude`.
    pub fn propose(
        &self,
        theta: &[f64],
        pool: &[Particle],
        exclude: Option<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        match self.kind {
            KernelKind::DifferentialEvolution => {
                let m = pool.len() - usize::from(exclude.is_some_and(|e| e < pool.len()));
                if m < 2 {
                    return Err(SabcError::Config(format!(
                        "differential evolution needs two partner particles, pool has {m}"
                    )));
                }
                let skip = |k: usize| match exclude {
                    Some(e) if k >= e => k + 1,
                    _ => k,
                };
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                let (b, c) = (&pool[skip(i)].theta, &pool[skip(j)].theta);
                Ok(theta
                    .iter()
                    .zip(b.iter().zip(c))
                    .map(|(&t, (&xb, &xc))| {
                        let z: f64 = StandardNormal.sample(rng);
                        t + self.gamma * (xb - xc) + self.jitter * z
                    })
                    .collect())
            }
            KernelKind::GaussianRandomWalk => {
                let l = self.chol.as_ref().ok_or_else(|| {
                    SabcError::Config("random-walk kernel used before its covariance was set".into())
                })?;
                let z: Vec<f64> = (0..theta.len()).map(|_| StandardNormal.sample(rng)).collect();
                Ok((0..theta.len())
                    .map(|r| theta[r] + (0..=r).map(|c| l[(r, c)] * z[c]).sum::<f64>())
                    .collect())
            }
        }
    }
}
