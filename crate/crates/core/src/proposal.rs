//! Within-chain proposals in whitened coordinates, the Metropolis-Hastings
//! acceptance test, and diminishing step-size adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{GaussianPrior, WhitenMap};

/// Acceptance rate the step size is steered towards.
pub const TARGET_ACCEPT: f64 = 0.234;
pub const PCN_MIN_ETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKind {
    /// Isotropic Gaussian random walk.
    Igrw,
    /// Adaptive (history-covariance) Gaussian random walk.
    Agrw,
    /// Preconditioned Crank-Nicolson.
    Pcn,
}

/// Streaming mean and scatter matrix (Welford).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningCov {
    n: u64,
    mean: Vec<f64>,
    /// Row-major `dim x dim` sum of outer products of deviations.
    scatter: Vec<f64>,
}

impl RunningCov {
    pub fn new(dim: usize) -> Self {
        RunningCov {
            n: 0,
            mean: vec![0.0; dim],
            scatter: vec![0.0; dim * dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let after_i = x[i] - self.mean[i];
            for j in 0..d {
                self.scatter[i * d + j] += delta[j] * after_i;
            }
        }
        // symmetrise against rounding
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (self.scatter[i * d + j] + self.scatter[j * d + i]);
                self.scatter[i * d + j] = v;
                self.scatter[j * d + i] = v;
            }
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance; zero until two points are seen.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.mean.len();
        if self.n < 2 {
            return DMatrix::zeros(d, d);
        }
        DMatrix::from_row_slice(d, d, &self.scatter) / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalState {
    pub kind: ProposalKind,
    pub eta: f64,
    /// Adaptation timescale `a` (samples) for the aGRW covariance mix.
    pub timescale: f64,
    /// Step-size adaptation gain `c`.
    pub gain: f64,
    /// Proposals made so far.
    pub n: u64,
    pub accepts: u64,
    /// Proposals rejected because a log density was NaN.
    pub nan_rejects: u64,
    pub adapting: bool,
    pub history: RunningCov,
}

impl ProposalState {
    pub fn new(kind: ProposalKind, eta: f64, dim: usize, timescale: f64, gain: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("step size must be positive"));
        }
        if kind == ProposalKind::Pcn && eta > 1.0 {
            return Err(Error::config("pCN step size must lie in (0, 1]"));
        }
        if !(timescale.is_finite() && timescale > 0.0) {
            return Err(Error::config("adaptation timescale must be positive"));
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::config("adaptation gain must be non-negative"));
        }
        Ok(ProposalState {
            kind,
            eta,
            timescale,
            gain,
            n: 0,
            accepts: 0,
            nan_rejects: 0,
            adapting: true,
            history: RunningCov::new(if kind == ProposalKind::Agrw { dim } else { 0 }),
        })
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.accepts as f64 / self.n as f64
        }
    }

    /// `Sigma_n = n/(n+a) cov + a/(n+a) I` over the chain history so far.
    pub fn mixed_covariance(&self) -> DMatrix<f64> {
        let n = self.history.count() as f64;
        let a = self.timescale;
        let d = self.history.mean().len();
        self.history.covariance() * (n / (n + a)) + DMatrix::identity(d, d) * (a / (n + a))
    }

    /// Records one proposal outcome and, while adapting, moves
    /// `log eta` by `(c/n)(accepted - target)`.
    pub fn adapt_step(&mut self, accepted: bool) {
        self.n += 1;
        if accepted {
            self.accepts += 1;
        }
        if !self.adapting || self.gain == 0.0 {
            return;
        }
        let signal = if accepted { 1.0 } else { 0.0 } - TARGET_ACCEPT;
        let log_eta = self.eta.ln() + self.gain / self.n as f64 * signal;
        self.eta = log_eta.exp();
        if self.kind == ProposalKind::Pcn {
            self.eta = self.eta.clamp(PCN_MIN_ETA, 1.0);
        }
    }

    /// Adds the chain's current whitened state to the aGRW history.
    pub fn observe(&mut self, z: &[f64]) {
        if self.kind == ProposalKind::Agrw && self.adapting {
            self.history.push(z);
        }
    }
}

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn propose_igrw<R: Rng + ?Sized>(theta: &[f64], eta: f64, rng: &mut R) -> Vec<f64> {
    theta
        .iter()
        .map(|t| t + eta * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn propose_agrw<R: Rng + ?Sized>(theta: &[f64], state: &ProposalState, rng: &mut R) -> Vec<f64> {
    let d = theta.len();
    let sigma = state.mixed_covariance();
    let l = match sigma.clone().cholesky() {
        Some(c) => c.l(),
        // the identity share keeps Sigma_n positive definite; only rounding
        // on a near-singular history can land here
        None => (sigma + DMatrix::identity(d, d) * 1e-10)
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::identity(d, d)),
    };
    let step = l * DVector::from_vec(normals(d, rng));
    theta
        .iter()
        .zip(step.iter())
        .map(|(t, s)| t + state.eta * s)
        .collect()
}

/// `sqrt(1 - eta^2) theta + eta u` with `u` a centred prior draw expressed
/// in whitened coordinates.
pub fn propose_pcn<R: Rng + ?Sized>(
    theta: &[f64],
    eta: f64,
    prior: &GaussianPrior,
    whiten: &WhitenMap,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config(format!("pCN step size {eta} outside (0, 1]")));
    }
    let mut u = prior.sample_centered(rng);
    whiten.scale_down(&mut u);
    let keep = (1.0 - eta * eta).sqrt();
    Ok(theta.iter().zip(&u).map(|(t, u)| keep * t + eta * u).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    /// Rejected because the log ratio was NaN.
    RejectNan,
}

impl Decision {
    pub fn accepted(self) -> bool {
        self == Decision::Accept
    }
}

/// Metropolis-Hastings test. Always consumes exactly one uniform draw.
pub fn mh_accept<R: Rng + ?Sized>(
    current_lp: f64,
    proposed_lp: f64,
    log_q_ratio: f64,
    rng: &mut R,
) -> Decision {
    let u: f64 = rng.random();
    let log_ratio = proposed_lp - current_lp + log_q_ratio;
    if current_lp.is_nan() || proposed_lp.is_nan() || log_q_ratio.is_nan() {
        return Decision::RejectNan;
    }
    if log_ratio.is_nan() {
        // -inf - (-inf): neither state is supported
        return Decision::Reject;
    }
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        Decision::Accept
    } else {
        Decision::Reject
    }
}
