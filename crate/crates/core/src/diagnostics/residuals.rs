//! Data residuals about the posterior-mean prediction.

use rayon::prelude::*;
use serde::Serialize;

use super::autocorr::sample_variance;
use crate::error::{Error, Result};
use crate::model::Inversion;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualGroup {
    /// Index of the sensor in the inversion.
    pub sensor: usize,
    pub label: String,
    pub unit: String,
    /// Standard deviation of `data - mean prediction`.
    pub sigma: f64,
    pub xy: Vec<[f64; 2]>,
    pub data: Vec<f64>,
    pub mean_prediction: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub n_samples: usize,
    pub groups: Vec<ResidualGroup>,
}

/// Averages forward predictions over `samples` and summarises the misfit
/// per sensor (MT apparent resistivity and phase separately).
pub fn residual_summary(inv: &Inversion, samples: &[&[f64]]) -> Result<ResidualSummary> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples for residual summary".into()));
    }
    let preds: Vec<Vec<Vec<f64>>> = samples
        .par_iter()
        .map(|theta| inv.predict(theta))
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let mut groups = Vec::new();
    for (i, sensor) in inv.sensors().iter().enumerate() {
        let mut mean = vec![0.0; sensor.data.len()];
        for p in &preds {
            for (m, v) in mean.iter_mut().zip(&p[i]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for (label, unit, idx) in sensor.groups() {
            let data: Vec<f64> = idx.iter().map(|&k| sensor.data.values[k]).collect();
            let mean_prediction: Vec<f64> = idx.iter().map(|&k| mean[k]).collect();
            let residuals: Vec<f64> = data.iter().zip(&mean_prediction).map(|(d, p)| d - p).collect();
            let sigma = if residuals.len() > 1 {
                sample_variance(&residuals).sqrt()
            } else {
                residuals[0].abs()
            };
            groups.push(ResidualGroup {
                sensor: i,
                label: label.to_string(),
                unit: unit.to_string(),
                sigma,
                xy: idx.iter().map(|&k| sensor.xy[k]).collect(),
                data,
                mean_prediction,
                residuals,
            });
        }
    }
    Ok(ResidualSummary {
        n_samples: samples.len(),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{GravityForward, SensorKind, SensorLocations};
    use crate::likelihood::NoiseHyper;
    use crate::model::Observations;
    use crate::prior::GaussianPrior;
    use crate::world::{Bounds, GridSpec, LayerSpec, MeanDepth, PropertyRole, World, WorldSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn setup(noise: f64) -> (Inversion, Vec<f64>) {
        let grid = GridSpec::new(1, 1, [0.0, 2000.0], [0.0, 2000.0]).unwrap();
        let spec = WorldSpec {
            layers: vec![
                LayerSpec::new("top", grid.clone(), MeanDepth::Constant(0.0), vec![PropertyRole::Density]),
                LayerSpec::new("base", grid, MeanDepth::Constant(400.0), vec![PropertyRole::Density]),
            ],
            bounds: Bounds {
                x: [0.0, 2000.0],
                y: [0.0, 2000.0],
                z: [0.0, 1000.0],
            },
            voxel_res: [6, 6, 10],
            margin: 0.0,
        };
        let world = World::new(spec).unwrap();
        let truth = vec![0.0, 100.0, 2.3, 2.8];
        // 552 stations on a 24 x 23 grid
        let points: Vec<[f64; 3]> = (0..552)
            .map(|i| [40.0 + 80.0 * (i % 24) as f64, 40.0 + 85.0 * (i / 24) as f64, -0.5])
            .collect();
        let loc = SensorLocations::new(SensorKind::Gravity, points.clone()).unwrap();
        let f = GravityForward::new(*world.geometry(), &loc).unwrap();
        let clean = f.predict(&world.voxelise_flat(&truth).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let values = clean
            .iter()
            .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let prior = GaussianPrior::independent(&[0.0, 0.0, 2.5, 2.5], &[1.0, 200.0, 0.3, 0.3]).unwrap();
        let inv = Inversion::new(
            world,
            prior,
            &[(Observations::Gravity { points, values }, NoiseHyper::default())],
            0,
        )
        .unwrap();
        (inv, truth)
    }

    #[test]
    fn exact_samples_give_zero_misfit() {
        let (inv, truth) = setup(0.0);
        let s = residual_summary(&inv, &[&truth, &truth]).unwrap();
        assert_eq!(s.groups.len(), 1);
        assert!(s.groups[0].sigma < 1e-12);
    }

    #[test]
    fn recovers_known_noise() {
        let (inv, truth) = setup(1.0);
        let s = residual_summary(&inv, &[&truth]).unwrap();
        let g = &s.groups[0];
        assert!((g.sigma - 1.0).abs() < 0.05, "{}", g.sigma);
        let n = g.residuals.len() as f64;
        let m = g.residuals.iter().sum::<f64>() / n;
        let m2 = g.residuals.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n;
        let m3 = g.residuals.iter().map(|r| (r - m).powi(3)).sum::<f64>() / n;
        assert!((m3 / m2.powf(1.5)).abs() < 0.3);
    }
}
