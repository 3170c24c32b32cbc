//! Inverse-temperature ladder, replica-exchange swaps and ladder adaptation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Swap acceptance rate the ladder spacing is steered towards.
pub const TARGET_SWAP: f64 = 0.24;
/// Bounds on each adapted `ln beta_k - ln beta_{k+1}`, keeping every beta
/// representable and the ladder strictly decreasing.
const LOG_SPACING_RANGE: (f64, f64) = (1e-9, 50.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    betas: Vec<f64>,
    /// Per adjacent pair `(k, k+1)`.
    attempts: Vec<u64>,
    accepts: Vec<u64>,
    /// Outcome of each pair's attempt in the latest round.
    last: Vec<Option<bool>>,
    rounds: u64,
}

impl Ladder {
    /// `beta_k = beta_min^(k/M)` for `k = 0..=M`.
    pub fn geometric(n_temps: usize, beta_min: f64) -> Result<Self> {
        if n_temps < 2 {
            return Err(Error::config(format!("n_temps must be at least 2, got {n_temps}")));
        }
        if !(beta_min > 0.0 && beta_min < 1.0) {
            return Err(Error::config(format!("beta_min must lie in (0, 1), got {beta_min}")));
        }
        let m = (n_temps - 1) as f64;
        let betas = (0..n_temps)
            .map(|k| if k == 0 { 1.0 } else { beta_min.powf(k as f64 / m) })
            .collect();
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.first() != Some(&1.0) {
            return Err(Error::config("ladder must start at beta = 1"));
        }
        if betas.windows(2).any(|w| !(w[1] < w[0])) || betas.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::config("ladder betas must be positive and strictly decreasing"));
        }
        let pairs = betas.len() - 1;
        Ok(Ladder {
            betas,
            attempts: vec![0; pairs],
            accepts: vec![0; pairs],
            last: vec![None; pairs],
            rounds: 0,
        })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn attempts(&self) -> &[u64] {
        &self.attempts
    }

    pub fn accepts(&self) -> &[u64] {
        &self.accepts
    }

    /// Cumulative swap acceptance of pair `(k, k+1)`; `None` before any attempt.
    pub fn swap_rate(&self, k: usize) -> Option<f64> {
        (self.attempts[k] > 0).then(|| self.accepts[k] as f64 / self.attempts[k] as f64)
    }

    /// Moves the log-spacing `ln(ln beta_k - ln beta_{k+1})` of every pair
    /// attempted in the latest round by `step * (swapped - TARGET_SWAP)`.
    /// `beta_0` stays 1.
    pub fn adapt(&mut self, step: f64) {
        if step == 0.0 {
            return;
        }
        let mut log_beta = 0.0;
        let old: Vec<f64> = self.betas.iter().map(|b| b.ln()).collect();
        for k in 0..self.betas.len() - 1 {
            let mut spacing = old[k] - old[k + 1];
            if let Some(swapped) = self.last[k] {
                let signal = if swapped { 1.0 } else { 0.0 } - TARGET_SWAP;
                spacing = (spacing * (step * signal).exp())
                    .clamp(LOG_SPACING_RANGE.0, LOG_SPACING_RANGE.1);
            }
            log_beta -= spacing;
            self.betas[k + 1] = log_beta.exp();
        }
    }
}

/// A replica whose state can be exchanged along the ladder.
pub trait Exchange {
    fn log_likelihood(&self) -> f64;
}

/// Log acceptance ratio for exchanging the state at `beta` (log-likelihood
/// `ll`) with the state at the hotter `beta_hot` (log-likelihood `ll_hot`).
pub fn swap_log_ratio(beta: f64, beta_hot: f64, ll: f64, ll_hot: f64) -> f64 {
    (beta - beta_hot) * (ll_hot - ll)
}

/// One swap round over alternating even/odd adjacent pairs. Every attempted
/// pair consumes one uniform draw. Returns the number of accepted swaps.
pub fn swap_step<S: Exchange, R: Rng + ?Sized>(ladder: &mut Ladder, states: &mut [S], rng: &mut R) -> usize {
    assert_eq!(states.len(), ladder.len(), "states must align with the ladder");
    let parity = (ladder.rounds % 2) as usize;
    ladder.rounds += 1;
    ladder.last.fill(None);
    let mut swapped = 0;
    let mut k = parity;
    while k + 1 < states.len() {
        let u: f64 = rng.random();
        let r = swap_log_ratio(
            ladder.betas[k],
            ladder.betas[k + 1],
            states[k].log_likelihood(),
            states[k + 1].log_likelihood(),
        );
        let accept = if r.is_nan() { false } else { r >= 0.0 || u.ln() < r };
        ladder.attempts[k] += 1;
        ladder.last[k] = Some(accept);
        if accept {
            ladder.accepts[k] += 1;
            states.swap(k, k + 1);
            swapped += 1;
        }
        k += 2;
    }
    swapped
}
