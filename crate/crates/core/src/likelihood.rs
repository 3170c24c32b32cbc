//! Sensor likelihoods with the noise variance marginalised analytically.
//!
//! Each residual is Gaussian with an unknown variance drawn from an
//! inverse-gamma `IG(alpha, beta)` prior. Integrating the variance out gives
//! a Student-t with `2 alpha` degrees of freedom and scale `sqrt(beta/alpha)`.
//! Residuals are expressed in units of the sensor data's standard deviation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseHyper {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NoiseHyper {
    fn default() -> Self {
        NoiseHyper {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

impl NoiseHyper {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let h = NoiseHyper { alpha, beta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(format!("noise alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config(format!("noise beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn dof(&self) -> f64 {
        2.0 * self.alpha
    }

    /// Student-t scale `sqrt(beta / alpha)` in normalised units.
    pub fn scale(&self) -> f64 {
        (self.beta / self.alpha).sqrt()
    }
}

/// Observed values for one sensor with per-value normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorData {
    pub values: Vec<f64>,
    /// Divisor applied to each residual.
    pub scale: Vec<f64>,
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

impl SensorData {
    /// All values share one normalisation: the sample standard deviation.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let groups = vec![0; values.len()];
        Self::grouped(values, &groups)
    }

    /// Values normalised by the standard deviation of their group. Groups
    /// with zero spread (or a single value) fall back to unit scale.
    pub fn grouped(values: Vec<f64>, groups: &[usize]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sensor has no observations".into()));
        }
        if groups.len() != values.len() {
            return Err(Error::InvalidInput("group labels misaligned with values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sensor values must be finite".into()));
        }
        let n_groups = groups.iter().max().map_or(0, |g| g + 1);
        let std: Vec<f64> = (0..n_groups)
            .map(|g| {
                let vs: Vec<f64> = values
                    .iter()
                    .zip(groups)
                    .filter(|(_, &k)| k == g)
                    .map(|(v, _)| *v)
                    .collect();
                let s = sample_std(&vs);
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let scale = groups.iter().map(|&g| std[g]).collect();
        Ok(SensorData { values, scale })
    }

    pub fn with_scale(values: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if values.len() != scale.len() || scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidInput("scales must be positive and aligned".into()));
        }
        Ok(SensorData { values, scale })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Log density of the standard Student-t with `nu` degrees of freedom.
pub fn student_t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Marginal log-likelihood of one sensor. Non-finite predictions give
/// `-inf`.
pub fn log_likelihood_sensor(pred: &[f64], data: &SensorData, hyper: &NoiseHyper) -> Result<f64> {
    if pred.len() != data.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} observations",
            pred.len(),
            data.len()
        )));
    }
    let nu = hyper.dof();
    let s = hyper.scale();
    let c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln() - s.ln();
    let mut total = 0.0;
    for ((p, d), k) in pred.iter().zip(&data.values).zip(&data.scale) {
        if !p.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let x = (p - d) / (k * s);
        total += c - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
    }
    Ok(total)
}

/// Sum over independent sensors.
pub fn log_likelihood(preds: &[Vec<f64>], data: &[SensorData], hypers: &[NoiseHyper]) -> Result<f64> {
    if preds.len() != data.len() || data.len() != hypers.len() {
        return Err(Error::InvalidInput("sensor lists are misaligned".into()));
    }
    let mut total = 0.0;
    for ((p, d), h) in preds.iter().zip(data).zip(hypers) {
        total += log_likelihood_sensor(p, d, h)?;
    }
    Ok(total)
}

/// `beta * log_like + log_prior`, with the `beta = 0` case exactly the prior.
pub fn tempered(log_prior: f64, log_like: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        log_prior
    } else {
        beta * log_like + log_prior
    }
}
