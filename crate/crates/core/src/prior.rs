//! Block-diagonal Gaussian prior and the whitening map used by proposals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Scale of whitened coordinates in units of the marginal prior std.
pub const WHITEN_SIGMAS: f64 = 3.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct PriorBlock {
    offset: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl PriorBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let centered = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&centered)
            .expect("factor has a positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

/// Gaussian prior made of independent consecutive blocks.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    blocks: Vec<PriorBlock>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl GaussianPrior {
    /// Blocks are laid out consecutively in the order given.
    pub fn new(blocks: Vec<(Vec<f64>, DMatrix<f64>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        let mut errs = Vec::new();
        for (i, (mean, cov)) in blocks.into_iter().enumerate() {
            let n = mean.len();
            if cov.nrows() != n || cov.ncols() != n {
                errs.push(format!(
                    "prior block {i}: covariance is {}x{}, mean has {n} entries",
                    cov.nrows(),
                    cov.ncols()
                ));
                continue;
            }
            if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
                errs.push(format!("prior block {i}: non-finite entries"));
                continue;
            }
            let asym = (&cov - cov.transpose()).abs().max();
            if asym > 1e-12 * cov.abs().max().max(1.0) {
                errs.push(format!("prior block {i}: covariance is not symmetric"));
                continue;
            }
            let Some(chol) = cov.clone().cholesky() else {
                errs.push(format!(
                    "prior block {i}: covariance is not positive definite"
                ));
                continue;
            };
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            out.push(PriorBlock {
                offset,
                mean: DVector::from_vec(mean),
                cov,
                chol,
                log_norm: -0.5 * (n as f64 * LN_2PI + log_det),
            });
            offset += n;
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mean = out.iter().flat_map(|b| b.mean.iter().copied()).collect();
        let std = out
            .iter()
            .flat_map(|b| b.cov.diagonal().iter().map(|v| v.sqrt()).collect::<Vec<_>>())
            .collect();
        Ok(GaussianPrior {
            blocks: out,
            mean,
            std,
        })
    }

    /// Independent normal prior, one scalar block per coordinate.
    pub fn independent(mean: &[f64], std: &[f64]) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::config("mean and std lengths differ"));
        }
        Self::new(
            mean.iter()
                .zip(std)
                .map(|(&m, &s)| (vec![m], DMatrix::from_element(1, 1, s * s)))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn blocks(&self) -> &[PriorBlock] {
        &self.blocks
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn marginal_std(&self) -> &[f64] {
        &self.std
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        self.blocks
            .iter()
            .map(|b| b.log_density(&theta[b.range()]))
            .sum()
    }

    /// Zero-mean draw with the prior covariance.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            let xi = DVector::from_fn(b.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            out.extend((b.chol.l_dirty().lower_triangle() * xi).iter());
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = self.sample_centered(rng);
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v += m;
        }
        x
    }

    pub fn whiten_map(&self) -> WhitenMap {
        WhitenMap {
            offset: self.mean.clone(),
            scale: self.std.iter().map(|s| WHITEN_SIGMAS * s).collect(),
        }
    }
}

/// Covariance with unit-variance-scaled constant off-diagonal correlation:
/// `sigma^2 * [(1 - rho) I + rho 11^T]`.
pub fn uniform_offdiag(n: usize, sigma: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { sigma * sigma } else { rho * sigma * sigma })
}

pub fn independent_cov(sigmas: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        sigmas.len(),
        sigmas.iter().map(|s| s * s),
    ))
}

/// Per-coordinate affine map `z = (theta - offset) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenMap {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl WhitenMap {
    pub fn whiten(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((t, o), s)| (t - o) / s)
            .collect()
    }

    pub fn unwhiten(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((z, o), s)| z * s + o)
            .collect()
    }

    /// Applies only the scaling (for centred quantities such as prior draws).
    pub fn scale_down(&self, v: &mut [f64]) {
        for (x, s) in v.iter_mut().zip(&self.scale) {
            *x /= s;
        }
    }
}
