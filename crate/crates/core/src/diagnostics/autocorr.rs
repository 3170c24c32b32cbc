//! Autocorrelation function and integrated autocorrelation time.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// IACT sums lags up to (excluding) the first with `rho_l` below this.
pub const IACT_CUTOFF: f64 = 0.05;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with `N - 1` normalisation.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Lagged products `c_l = sum_j d_j d_{j+l}` of the centred series for
/// `l = 0..=max_lag`, computed by zero-padded FFT.
fn lagged_products(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|v| Complex64::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in &mut buf {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..=max_lag].iter().map(|c| c.re / size as f64).collect()
}

fn check(x: &[f64], max_lag: usize) -> Result<f64> {
    if x.len() < 2 || max_lag >= x.len() {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for lag {max_lag}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series has non-finite values".into()));
    }
    let w = sample_variance(x);
    if !(w > 0.0) {
        return Err(Error::DegenerateSeries("series is constant".into()));
    }
    Ok(w)
}

/// `rho_0..=rho_max_lag` with `rho_l = c_l / ((N - l) W)`, `W` the sample
/// variance. `rho_0` is defined as 1.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let w = check(x, max_lag)?;
    let n = x.len();
    let c = lagged_products(x, max_lag);
    Ok(c.iter()
        .enumerate()
        .map(|(l, cl)| if l == 0 { 1.0 } else { cl / ((n - l) as f64 * w) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iact {
    /// In units of the series spacing.
    pub tau: f64,
    /// Number of lags summed.
    pub window: usize,
}

/// `tau = 1 + 2 sum_{l=1}^{L} (1 - l/N) rho_l`, with `L` the last lag
/// before `rho_l` first drops below `IACT_CUTOFF`.
pub fn iact(x: &[f64]) -> Result<Iact> {
    let n = x.len();
    let max_lag = n.saturating_sub(1);
    let rho = acf(x, max_lag)?;
    let mut sum = 0.0;
    let mut window = 0;
    for (l, r) in rho.iter().enumerate().skip(1) {
        if *r < IACT_CUTOFF {
            break;
        }
        sum += (1.0 - l as f64 / n as f64) * r;
        window = l;
    }
    Ok(Iact {
        tau: (1.0 + 2.0 * sum).max(0.0),
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut v: f64 = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
        for _ in 0..n {
            x.push(v);
            v = phi * v + rng.sample::<f64, _>(StandardNormal);
        }
        x
    }

    #[test]
    fn matches_direct_sum() {
        let x = ar1(0.7, 500, 1);
        let rho = acf(&x, 20).unwrap();
        let n = x.len();
        let m = mean(&x);
        let w = sample_variance(&x);
        for l in 1..=20 {
            let direct: f64 = (l..n).map(|j| (x[j] - m) * (x[j - l] - m)).sum::<f64>() / ((n - l) as f64 * w);
            assert!((rho[l] - direct).abs() < 1e-10);
        }
        assert_eq!(rho[0], 1.0);
    }

    #[test]
    fn iid_has_no_correlation() {
        let x = ar1(0.0, 1_000_000, 2);
        let rho = acf(&x, 1).unwrap();
        assert!(rho[1].abs() < 0.005);
        let t = iact(&x).unwrap();
        assert!((t.tau - 1.0).abs() < 0.05);
    }

    #[test]
    fn ar1_acf() {
        let x = ar1(0.9, 1_000_000, 3);
        let rho = acf(&x, 20).unwrap();
        for (l, r) in rho.iter().enumerate() {
            assert!((r - 0.9f64.powi(l as i32)).abs() < 0.02, "lag {l}");
        }
    }

    #[test]
    fn duplicated_iid() {
        let base = ar1(0.0, 500_000, 4);
        let x: Vec<f64> = base.iter().flat_map(|v| [*v, *v]).collect();
        let rho = acf(&x, 1).unwrap();
        assert!((rho[1] - 0.5).abs() < 0.01);
    }

    #[test]
    fn ar1_iact() {
        for phi in [0.5, 0.9] {
            let t = iact(&ar1(phi, 1_000_000, 5)).unwrap();
            let exact = (1.0 + phi) / (1.0 - phi);
            assert!((t.tau / exact - 1.0).abs() < 0.1, "phi {phi}: {}", t.tau);
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert_eq!(acf(&[2.0; 10], 3).unwrap_err().kind(), "degenerate_series");
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn shuffling_does_not_raise_iact() {
        let x = ar1(0.8, 20_000, 6);
        let tau = iact(&x).unwrap().tau;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut y = x.clone();
            y.shuffle(&mut rng);
            assert!(iact(&y).unwrap().tau <= tau);
        }
    }
}
