//! One-dimensional magnetotelluric response of the voxel column beneath
//! each site.

use num_complex::Complex64;

use super::MU0;
use crate::error::{Error, Result};
use crate::world::{PropertyRole, VoxelModel};

#[derive(Debug, Clone, PartialEq)]
pub struct MtConfig {
    /// Hz, strictly positive and sorted descending.
    pub frequencies: Vec<f64>,
    pub sites: Vec<[f64; 2]>,
}

impl MtConfig {
    /// Sorts and de-duplicates the frequencies (descending).
    pub fn new(mut frequencies: Vec<f64>, sites: Vec<[f64; 2]>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidInput("MT needs at least one frequency".into()));
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidInput("MT frequencies must be positive".into()));
        }
        if sites.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("MT site coordinates must be finite".into()));
        }
        frequencies.sort_by(|a, b| b.total_cmp(a));
        frequencies.dedup();
        Ok(MtConfig { frequencies, sites })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtPoint {
    /// ohm-m
    pub app_res: f64,
    /// degrees
    pub phase_deg: f64,
}

/// `tanh(z)` for `Re z >= 0` without overflow.
fn tanh_stable(z: Complex64) -> Complex64 {
    let t = (-2.0 * z).exp();
    (1.0 - t) / (1.0 + t)
}

/// Surface impedance of a layered earth. `resistivity` has one more entry
/// than `thickness`; the last entry is the basement half-space.
pub fn layered_impedance(thickness: &[f64], resistivity: &[f64], freq: f64) -> Result<Complex64> {
    if resistivity.len() != thickness.len() + 1 {
        return Err(Error::InvalidInput(
            "need one resistivity per layer plus the half-space".into(),
        ));
    }
    if resistivity.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidInput("resistivities must be positive".into()));
    }
    if thickness.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(Error::InvalidInput("layer thicknesses must be non-negative".into()));
    }
    let omega = 2.0 * std::f64::consts::PI * freq;
    let iwm = Complex64::new(0.0, omega * MU0);
    let intrinsic = |rho: f64| {
        let k = (iwm / rho).sqrt();
        (k, iwm / k)
    };
    let (_, mut z) = intrinsic(*resistivity.last().unwrap());
    for (&h, &rho) in thickness.iter().zip(resistivity).rev() {
        let (k, z0) = intrinsic(rho);
        let t = tanh_stable(k * h);
        z = z0 * (z + z0 * t) / (z0 + z * t);
    }
    Ok(z)
}

pub fn apparent(z: Complex64, freq: f64) -> MtPoint {
    let omega = 2.0 * std::f64::consts::PI * freq;
    MtPoint {
        app_res: z.norm_sqr() / (omega * MU0),
        phase_deg: z.arg().to_degrees(),
    }
}

/// Splits a column of log10 resistivities into `(thicknesses, resistivities)`
/// of constant runs; the deepest run becomes the half-space.
pub fn column_layers(log_res: &[f64], dz: f64) -> (Vec<f64>, Vec<f64>) {
    let mut thickness = Vec::new();
    let mut res = Vec::new();
    let mut start = 0;
    for i in 1..=log_res.len() {
        if i == log_res.len() || log_res[i] != log_res[start] {
            thickness.push((i - start) as f64 * dz);
            res.push(10f64.powf(log_res[start]));
            start = i;
        }
    }
    thickness.pop();
    (thickness, res)
}

/// Apparent resistivity and phase per site (outer) and frequency (inner).
pub fn mt1d_forward(model: &VoxelModel, cfg: &MtConfig) -> Result<Vec<Vec<MtPoint>>> {
    let log_res = model
        .property(PropertyRole::LogResistivity)
        .ok_or_else(|| Error::InvalidInput("model has no resistivity grid".into()))?;
    if log_res.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-positive or missing resistivity".into()));
    }
    let g = &model.geometry;
    cfg.sites
        .iter()
        .map(|s| {
            let col = g.column_at(s[0], s[1]);
            let (h, r) = column_layers(&log_res[model.column(col)], g.cell[2]);
            cfg.frequencies
                .iter()
                .map(|&f| Ok(apparent(layered_impedance(&h, &r, f)?, f)))
                .collect()
        })
        .collect()
}

/// MT forward bound to an observation list: each observation is a
/// `(site, frequency)` pair.
#[derive(Debug, Clone)]
pub struct MtForward {
    config: MtConfig,
    /// `(site index, frequency index)` per observation.
    index: Vec<(usize, usize)>,
}

impl MtForward {
    pub fn new(config: MtConfig, index: Vec<(usize, usize)>) -> Result<Self> {
        if index
            .iter()
            .any(|&(s, f)| s >= config.sites.len() || f >= config.frequencies.len())
        {
            return Err(Error::InvalidInput("MT observation index out of range".into()));
        }
        Ok(MtForward { config, index })
    }

    pub fn config(&self) -> &MtConfig {
        &self.config
    }

    /// Per observation: `(log10 apparent resistivity, phase in degrees)`.
    pub fn predict(&self, model: &VoxelModel) -> Result<Vec<(f64, f64)>> {
        let resp = mt1d_forward(model, &self.config)?;
        Ok(self
            .index
            .iter()
            .map(|&(s, f)| {
                let p = resp[s][f];
                (p.app_res.log10(), p.phase_deg)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_space() {
        for (rho, f) in [(100.0, 1.0), (3.0, 1e3), (5000.0, 1e-3)] {
            let p = apparent(layered_impedance(&[], &[rho], f).unwrap(), f);
            assert!(((p.app_res - rho) / rho).abs() < 1e-8);
            assert!((p.phase_deg - 45.0).abs() < 1e-8);
        }
    }

    #[test]
    fn high_frequency_sees_top_layer() {
        // skin depth ~503 sqrt(rho/f) = 5 m at 1e4 Hz in 1 ohm-m
        let f = 1e4;
        let p = apparent(layered_impedance(&[2000.0], &[1.0, 1000.0], f).unwrap(), f);
        assert!((p.app_res - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_fine_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(50.0..800.0)).collect();
        let r: Vec<f64> = (0..6).map(|_| 10f64.powf(rng.random_range(0.0..3.5))).collect();
        let total: f64 = h.iter().sum();
        // 1000 sublayers distributed in proportion to thickness
        let mut fh = Vec::new();
        let mut fr = Vec::new();
        for (hi, ri) in h.iter().zip(&r) {
            let n = ((hi / total) * 1000.0).round().max(1.0) as usize;
            for _ in 0..n {
                fh.push(hi / n as f64);
                fr.push(*ri);
            }
        }
        fr.push(r[5]);
        for f in [1e-3, 0.1, 10.0, 1e3] {
            let a = apparent(layered_impedance(&h, &r, f).unwrap(), f);
            let b = apparent(layered_impedance(&fh, &fr, f).unwrap(), f);
            assert!(((a.app_res - b.app_res) / b.app_res).abs() < 1e-6);
            assert!(((a.phase_deg - b.phase_deg) / b.phase_deg).abs() < 1e-6);
            assert!(a.phase_deg > 0.0 && a.phase_deg < 90.0);
        }
    }

    #[test]
    fn rejects_bad_resistivity() {
        assert!(layered_impedance(&[10.0], &[0.0, 10.0], 1.0).is_err());
        assert!(layered_impedance(&[10.0], &[-5.0, 10.0], 1.0).is_err());
    }

    #[test]
    fn column_runs() {
        let (h, r) = column_layers(&[1.0, 1.0, 2.0, 2.0, 2.0, 0.0], 10.0);
        assert_eq!(h, vec![20.0, 30.0]);
        assert_eq!(r, vec![10.0, 100.0, 1.0]);
    }

    #[test]
    fn config_sorts_frequencies() {
        let c = MtConfig::new(vec![1.0, 100.0, 10.0, 100.0], vec![[0.0, 0.0]]).unwrap();
        assert_eq!(c.frequencies, vec![100.0, 10.0, 1.0]);
        assert!(MtConfig::new(vec![0.0], vec![]).is_err());
    }
}
