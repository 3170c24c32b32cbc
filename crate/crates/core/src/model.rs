//! The posterior targeted by the sampler: a world, its prior, and the
//! sensors whose data it must explain.

use crate::error::{Error, Result};
use crate::forward::{
    GravityForward, InducingField, MagneticForward, MtConfig, MtForward, SensorKind, SensorLocations,
};
use crate::likelihood::{log_likelihood_sensor, NoiseHyper, SensorData};
use crate::prior::GaussianPrior;
use crate::world::{VoxelGeometry, VoxelModel, World};

/// A distribution the sampler can explore: a Gaussian prior times a
/// likelihood.
pub trait Target: Sync {
    fn prior(&self) -> &GaussianPrior;

    /// Log-likelihood of `theta`. `-inf` for unsupported states, NaN only
    /// when the evaluation itself failed.
    fn log_likelihood(&self, theta: &[f64]) -> f64;

    fn dim(&self) -> usize {
        self.prior().dim()
    }

    /// `beta * log L + log prior`.
    fn tempered_log_post(&self, theta: &[f64], beta: f64) -> f64 {
        crate::likelihood::tempered(self.prior().log_density(theta), self.log_likelihood(theta), beta)
    }
}

/// One magnetotelluric reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtRecord {
    pub x: f64,
    pub y: f64,
    pub freq_hz: f64,
    pub app_res_ohmm: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    /// Gravity anomaly in mGal at `(x, y, z)` points, z positive down.
    Gravity { points: Vec<[f64; 3]>, values: Vec<f64> },
    /// Total magnetic intensity anomaly in nT.
    Magnetic {
        points: Vec<[f64; 3]>,
        values: Vec<f64>,
        field: InducingField,
    },
    Mt { records: Vec<MtRecord> },
}

impl Observations {
    pub fn kind(&self) -> SensorKind {
        match self {
            Observations::Gravity { .. } => SensorKind::Gravity,
            Observations::Magnetic { .. } => SensorKind::Magnetic,
            Observations::Mt { .. } => SensorKind::Mt,
        }
    }
}

#[derive(Debug, Clone)]
enum SensorForward {
    Gravity(GravityForward),
    Magnetic(MagneticForward),
    Mt(MtForward),
}

fn centered(values: &[f64]) -> Vec<f64> {
    let m = values.iter().sum::<f64>() / values.len().max(1) as f64;
    values.iter().map(|v| v - m).collect()
}

/// A sensor with its forward model, data and noise prior. Potential-field
/// data are mean-centred like their predictions. MT data are interleaved
/// `(log10 app. res., phase)` pairs, each quantity normalised separately.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub kind: SensorKind,
    pub data: SensorData,
    pub hyper: NoiseHyper,
    /// Lateral position of each data value.
    pub xy: Vec<[f64; 2]>,
    forward: SensorForward,
}

impl Sensor {
    /// Potential-field kernels see the model extended by `pad` edge-copied
    /// columns on each side.
    pub fn build(obs: &Observations, hyper: NoiseHyper, geometry: VoxelGeometry, pad: usize) -> Result<Self> {
        hyper.validate()?;
        let (forward, data, xy) = match obs {
            Observations::Gravity { points, values } => {
                let loc = SensorLocations::new(SensorKind::Gravity, points.clone())?;
                check_len(points.len(), values.len())?;
                (
                    SensorForward::Gravity(GravityForward::padded(geometry, pad, &loc)?),
                    SensorData::new(centered(values))?,
                    points.iter().map(|p| [p[0], p[1]]).collect(),
                )
            }
            Observations::Magnetic {
                points,
                values,
                field,
            } => {
                let loc = SensorLocations::new(SensorKind::Magnetic, points.clone())?;
                check_len(points.len(), values.len())?;
                (
                    SensorForward::Magnetic(MagneticForward::padded(geometry, pad, &loc, *field)?),
                    SensorData::new(centered(values))?,
                    points.iter().map(|p| [p[0], p[1]]).collect(),
                )
            }
            Observations::Mt { records } => {
                let (forward, values) = mt_forward(records)?;
                let groups: Vec<usize> = (0..values.len()).map(|i| i % 2).collect();
                let xy = records.iter().flat_map(|r| [[r.x, r.y]; 2]).collect();
                (SensorForward::Mt(forward), SensorData::grouped(values, &groups)?, xy)
            }
        };
        Ok(Sensor {
            kind: obs.kind(),
            data,
            hyper,
            xy,
            forward,
        })
    }

    /// Predictions aligned with `data.values`.
    pub fn predict(&self, model: &VoxelModel) -> Result<Vec<f64>> {
        match &self.forward {
            SensorForward::Gravity(f) => f.predict(model),
            SensorForward::Magnetic(f) => f.predict(model),
            SensorForward::Mt(f) => Ok(f.predict(model)?.into_iter().flat_map(|(r, p)| [r, p]).collect()),
        }
    }

    pub fn log_likelihood(&self, model: &VoxelModel) -> Result<f64> {
        log_likelihood_sensor(&self.predict(model)?, &self.data, &self.hyper)
    }

    /// Residual groups reported separately: `(label, unit, indices)`.
    pub fn groups(&self) -> Vec<(&'static str, &'static str, Vec<usize>)> {
        let n = self.data.len();
        match self.kind {
            SensorKind::Gravity => vec![("gravity", "mGal", (0..n).collect())],
            SensorKind::Magnetic => vec![("magnetic", "nT", (0..n).collect())],
            SensorKind::Mt => vec![
                ("mt_log10_app_res", "log10(ohm m)", (0..n).step_by(2).collect()),
                ("mt_phase", "deg", (1..n).step_by(2).collect()),
            ],
        }
    }
}

fn check_len(points: usize, values: usize) -> Result<()> {
    if points != values {
        return Err(Error::InvalidInput(format!(
            "{points} locations but {values} values"
        )));
    }
    Ok(())
}

fn mt_forward(records: &[MtRecord]) -> Result<(MtForward, Vec<f64>)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("MT sensor has no observations".into()));
    }
    let mut sites: Vec<[f64; 2]> = Vec::new();
    for r in records {
        if !sites.contains(&[r.x, r.y]) {
            sites.push([r.x, r.y]);
        }
    }
    let config = MtConfig::new(records.iter().map(|r| r.freq_hz).collect(), sites)?;
    let mut index = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(2 * records.len());
    for r in records {
        if !(r.app_res_ohmm.is_finite() && r.app_res_ohmm > 0.0) {
            return Err(Error::InvalidInput("MT apparent resistivity must be positive".into()));
        }
        let s = config.sites.iter().position(|s| *s == [r.x, r.y]).unwrap();
        let f = config.frequencies.iter().position(|f| *f == r.freq_hz).unwrap();
        index.push((s, f));
        values.push(r.app_res_ohmm.log10());
        values.push(r.phase_deg);
    }
    Ok((MtForward::new(config, index)?, values))
}

/// Posterior over world parameters given sensor data.
#[derive(Debug, Clone)]
pub struct Inversion {
    world: World,
    prior: GaussianPrior,
    sensors: Vec<Sensor>,
    pad_cells: usize,
}

impl Inversion {
    pub fn new(
        world: World,
        prior: GaussianPrior,
        observations: &[(Observations, NoiseHyper)],
        pad_cells: usize,
    ) -> Result<Self> {
        if prior.dim() != world.layout().dim {
            return Err(Error::config(format!(
                "prior has dimension {}, world parameters have {}",
                prior.dim(),
                world.layout().dim
            )));
        }
        let geometry = *world.geometry();
        let sensors = observations
            .iter()
            .map(|(obs, h)| Sensor::build(obs, *h, geometry, pad_cells))
            .collect::<Result<Vec<_>>>()?;
        let inv = Inversion {
            world,
            prior,
            sensors,
            pad_cells,
        };
        // surface structural problems (missing property roles) up front
        inv.try_log_likelihood(inv.prior.mean())?;
        Ok(inv)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn pad_cells(&self) -> usize {
        self.pad_cells
    }

    /// Voxel model the sensors see; edge padding is folded into the kernels.
    pub fn forward_model(&self, theta: &[f64]) -> Result<VoxelModel> {
        self.world.voxelise_flat(theta)
    }

    pub fn predict(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let model = self.forward_model(theta)?;
        self.sensors.iter().map(|s| s.predict(&model)).collect()
    }

    pub fn try_log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let model = self.forward_model(theta)?;
        let mut total = 0.0;
        for s in &self.sensors {
            total += s.log_likelihood(&model)?;
        }
        Ok(total)
    }
}

impl Target for Inversion {
    fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match self.try_log_likelihood(theta) {
            Ok(v) => v,
            Err(Error::InvalidInput(_)) => f64::NEG_INFINITY,
            Err(_) => f64::NAN,
        }
    }
}
