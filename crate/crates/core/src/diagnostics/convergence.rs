//! Multi-chain convergence statistics and acceptance summaries.

use serde::Serialize;

use super::autocorr::{iact, sample_variance};
use crate::error::{Error, Result};

/// Gelman-Rubin ratio above which a parameter is flagged unconverged.
pub const GELMAN_RUBIN_THRESHOLD: f64 = 1.1;
/// Acceptance fractions outside this band are flagged.
pub const ACCEPTANCE_BAND: (f64, f64) = (0.2, 0.5);

/// Per-parameter statistics over `M` chains of equal length `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStats {
    pub chain_means: Vec<f64>,
    pub pooled_mean: f64,
    /// `B = N/(M-1) sum_k (mean_k - pooled)^2`.
    pub between: f64,
    /// `W = mean_k s_k^2`.
    pub within: f64,
    pub chain_variances: Vec<f64>,
    /// `V/W = (N-1)/N + (M+1)/(M N) B/W`.
    pub ratio: f64,
    /// Per chain, in recorded-sample units.
    pub iact: Vec<f64>,
}

fn check_chains(chains: &[&[f64]]) -> Result<(usize, usize)> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidInput("Gelman-Rubin needs at least two chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("chains have unequal lengths".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput("chains need at least two samples".into()));
    }
    Ok((m, n))
}

fn between_within(chains: &[&[f64]]) -> Result<(Vec<f64>, f64, f64, Vec<f64>, f64, f64)> {
    let (m, n) = check_chains(chains)?;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let pooled = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m as f64 - 1.0) * means.iter().map(|x| (x - pooled).powi(2)).sum::<f64>();
    let vars: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    let w = vars.iter().sum::<f64>() / m as f64;
    if !(w > 0.0) {
        return Err(Error::DegenerateSeries("within-chain variance is zero".into()));
    }
    Ok((means, pooled, b, vars, w, n as f64))
}

/// Gelman-Rubin variance ratio from `B` and `W` for `m` chains of length `n`.
pub fn gelman_rubin_ratio(b: f64, w: f64, m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    (n - 1.0) / n + (m + 1.0) / (m * n) * b / w
}

pub fn gelman_rubin(chains: &[&[f64]]) -> Result<f64> {
    let (_, _, b, _, w, n) = between_within(chains)?;
    Ok(gelman_rubin_ratio(b, w, chains.len(), n as usize))
}

impl ChainStats {
    pub fn compute(chains: &[&[f64]]) -> Result<Self> {
        let (chain_means, pooled_mean, between, chain_variances, within, n) = between_within(chains)?;
        let iact = chains
            .iter()
            .map(|c| iact(c).map(|t| t.tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChainStats {
            ratio: gelman_rubin_ratio(between, within, chains.len(), n as usize),
            chain_means,
            pooled_mean,
            between,
            within,
            chain_variances,
            iact,
        })
    }

    pub fn converged(&self) -> bool {
        self.ratio < GELMAN_RUBIN_THRESHOLD
    }
}

pub fn acceptance_fraction(accepts: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        accepts as f64 / n as f64
    }
}

pub fn in_acceptance_band(fraction: f64) -> bool {
    (ACCEPTANCE_BAND.0..=ACCEPTANCE_BAND.1).contains(&fraction)
}
