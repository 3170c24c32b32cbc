//! Synthetic two-layer gravity survey: a flat cover over a basement whose
//! surface dips 300 m under one control point.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::config::{LoadedConfig, RunConfig};
use crate::io::sensors::write_potential_csv;
use crate::likelihood::NoiseHyper;
use crate::model::{Inversion, Observations};

/// Cover control depth, basement control depths (x-major 2 x 2), cover
/// density, basement density.
pub const TRUTH: [f64; 7] = [0.0, 0.0, 0.0, 0.0, 300.0, 2.4, 2.7];
/// Index of the perturbed basement control depth in `TRUTH`.
pub const PERTURBED: usize = 4;
pub const CONFIG_FILE: &str = "config.json";
pub const DATA_FILE: &str = "gravity.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    pub iterations: u64,
    pub n_stacks: usize,
    pub n_temps: usize,
    pub thinning: u64,
    pub seed: u64,
    pub checkpoint_interval: Option<u64>,
    /// Gaussian noise added to the clean anomaly, mGal.
    pub noise_mgal: f64,
    pub noise_seed: u64,
    /// `None` matches the likelihood scale to the added noise.
    pub hyper: Option<NoiseHyper>,
}

impl Default for Survey {
    fn default() -> Self {
        Survey {
            iterations: 20_000,
            n_stacks: 4,
            n_temps: 8,
            thinning: 10,
            seed: 1,
            checkpoint_interval: Some(5000),
            noise_mgal: 0.1,
            noise_seed: 7,
            hyper: None,
        }
    }
}

/// 15 x 15 stations 1 m above the surface.
pub fn stations() -> Vec<[f64; 3]> {
    (0..225)
        .map(|i| [200.0 + 257.0 * (i % 15) as f64, 200.0 + 257.0 * (i / 15) as f64, -1.0])
        .collect()
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

impl Survey {
    pub fn config_json(&self, hyper: NoiseHyper) -> Value {
        json!({
            "format_version": 1,
            "world": {
                "bounds": {"x": [0, 4000], "y": [0, 4000], "z": [0, 3000]},
                "voxel_res": [12, 12, 40],
                "edge_pad_cells": 2,
                "layers": [
                    {
                        "name": "cover",
                        "grid": {"nx": 1, "ny": 1, "x": [0, 4000], "y": [0, 4000]},
                        "mean_depth": {"constant_m": 0},
                        "properties": ["density"],
                        "prior": {
                            "control": {"template": "independent", "sigma_m": 1},
                            "properties": {"mean": [2.4]}
                        }
                    },
                    {
                        "name": "basement",
                        "grid": {"nx": 2, "ny": 2, "x": [1000, 3000], "y": [1000, 3000]},
                        "mean_depth": {"constant_m": 1000},
                        "properties": ["density"],
                        "prior": {
                            "control": {"template": "independent", "sigma_m": 300},
                            "properties": {"mean": [2.6]}
                        }
                    }
                ]
            },
            "sensors": {"gravity": {"file": DATA_FILE, "noise": {"alpha": hyper.alpha, "beta": hyper.beta}}},
            "sampler": {
                "iterations": self.iterations,
                "n_stacks": self.n_stacks,
                "n_temps": self.n_temps,
                "thinning": self.thinning,
                "seed": self.seed,
                "checkpoint_interval": self.checkpoint_interval,
                "eta0": 0.01,
                "step_gain": 5.0,
                "swap_interval": 2
            },
            "outputs": {"directory": "output", "slice_depths_m": [1000, 1500], "target_layer": "basement",
                        "entropy_below_m": 500, "burn_in_fraction": 0.5, "max_posterior_samples": 500}
        })
    }

    /// Noisy anomaly of the `TRUTH` world at `stations()`, mGal.
    pub fn data(&self) -> Result<Vec<f64>> {
        let mut run: RunConfig = serde_json::from_value(self.config_json(NoiseHyper::default()))?;
        run.sensors.gravity = None;
        let loaded = LoadedConfig::assemble(run, PathBuf::new())?;
        let points = stations();
        let obs = [(
            Observations::Gravity {
                values: vec![0.0; points.len()],
                points,
            },
            NoiseHyper::default(),
        )];
        let inv = Inversion::new(loaded.world, loaded.prior, &obs, 2)?;
        let clean = inv.predict(&TRUTH)?.swap_remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        Ok(clean
            .iter()
            .map(|v| v + self.noise_mgal * rng.sample::<f64, _>(StandardNormal))
            .collect())
    }

    /// Writes the config and data files into `dir`; returns the config path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let values = self.data()?;
        write_potential_csv(&dir.join(DATA_FILE), &stations(), &values)?;
        let hyper = match self.hyper {
            Some(h) => h,
            None => {
                // Student-t scale sqrt(beta / alpha) equal to the noise in normalised units
                let alpha = 5.0;
                NoiseHyper::new(alpha, alpha * (self.noise_mgal / sample_std(&values)).powi(2))?
            }
        };
        let path = dir.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(&self.config_json(hyper))? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
