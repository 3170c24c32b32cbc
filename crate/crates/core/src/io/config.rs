//! JSON run configuration: schema, validation and assembly of the world,
//! prior and sensor data it describes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sensors::{load_mt_csv, load_potential_csv, read_depth_csv};
use crate::error::{Error, Result};
use crate::forward::InducingField;
use crate::likelihood::NoiseHyper;
use crate::model::{Inversion, Observations};
use crate::prior::{independent_cov, uniform_offdiag, GaussianPrior};
use crate::sampler::SamplerConfig;
use crate::world::{Bounds, DepthTable, GridSpec, LayerSpec, MeanDepth, PropertyRole, World, WorldSpec};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub world: WorldConfig,
    #[serde(default)]
    pub sensors: SensorsConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Survey footprint and depth range, metres, z positive down.
    pub bounds: Bounds,
    pub voxel_res: [usize; 3],
    /// Lateral padding of the modelled volume around the footprint, metres.
    #[serde(default)]
    pub margin_m: f64,
    /// Extra edge-copied cells around the volume for forward modelling.
    #[serde(default)]
    pub edge_pad_cells: usize,
    pub layers: Vec<LayerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MeanDepthConfig {
    ConstantM(f64),
    /// CSV with columns `x_m, y_m, depth_m`.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: String,
    pub grid: GridConfig,
    pub mean_depth: MeanDepthConfig,
    /// Defaults to the control-point spacing.
    #[serde(default)]
    pub kernel_lengths_m: Option<[f64; 2]>,
    #[serde(default)]
    pub properties: Vec<PropertyRole>,
    pub prior: LayerPriorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerPriorConfig {
    pub control: ControlCov,
    #[serde(default)]
    pub properties: Option<PropertyPrior>,
}

fn half() -> f64 {
    0.5
}

/// Covariance of a layer's control-point offsets (zero mean), metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlCov {
    Independent {
        sigma_m: f64,
    },
    UniformOffdiag {
        sigma_m: f64,
        #[serde(default = "half")]
        offdiag: f64,
    },
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyPrior {
    pub mean: Vec<f64>,
    #[serde(default)]
    pub cov: PropertyCov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PropertyCov {
    /// Standard deviations per property; omitted means the loose defaults
    /// of each property role.
    Independent {
        #[serde(default)]
        sigma: Option<Vec<f64>>,
    },
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
}

impl Default for PropertyCov {
    fn default() -> Self {
        PropertyCov::Independent { sigma: None }
    }
}

/// Loose prior standard deviation of each property role.
pub fn default_property_sigma(role: PropertyRole) -> f64 {
    match role {
        PropertyRole::Density => 0.2,
        PropertyRole::LogSusceptibility => 0.5,
        PropertyRole::LogResistivity => 0.7,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsConfig {
    #[serde(default)]
    pub gravity: Option<PotentialSensorConfig>,
    #[serde(default)]
    pub magnetic: Option<MagneticSensorConfig>,
    #[serde(default)]
    pub mt: Option<PotentialSensorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSensorConfig {
    pub file: PathBuf,
    #[serde(default)]
    pub noise: NoiseHyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSensorConfig {
    pub file: PathBuf,
    #[serde(default)]
    pub noise: NoiseHyper,
    pub field: InducingField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub directory: PathBuf,
    /// Depths of exported probability and entropy slices, metres.
    pub slice_depths_m: Vec<f64>,
    /// Layer whose occupancy probability is mapped.
    pub target_layer: Option<String>,
    /// Mean entropy is averaged over voxels centred below this depth.
    pub entropy_below_m: f64,
    /// Fraction of recorded samples discarded before diagnostics.
    pub burn_in_fraction: f64,
    /// Cap on samples voxelised or forward-modelled during diagnostics.
    pub max_posterior_samples: Option<usize>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            directory: PathBuf::from("output"),
            slice_depths_m: Vec::new(),
            target_layer: None,
            entropy_below_m: 0.0,
            burn_in_fraction: 0.5,
            max_posterior_samples: Some(1000),
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_noise(errs: &mut Vec<String>, field: &str, h: &NoiseHyper) {
    if !(h.alpha.is_finite() && h.alpha > 0.0) {
        errs.push(format!("{field}.noise.alpha must be > 0, got {}", h.alpha));
    }
    if !(h.beta.is_finite() && h.beta > 0.0) {
        errs.push(format!("{field}.noise.beta must be > 0, got {}", h.beta));
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("schema: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every violated constraint, named by field path.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        if self.format_version != CONFIG_FORMAT_VERSION {
            e.push(format!(
                "format_version must be {CONFIG_FORMAT_VERSION}, got {}",
                self.format_version
            ));
        }
        let w = &self.world;
        if w.layers.is_empty() {
            e.push("world.layers must list at least one layer".into());
        }
        if !(w.margin_m.is_finite() && w.margin_m >= 0.0) {
            e.push(format!("world.margin_m must be non-negative, got {}", w.margin_m));
        }
        for (axis, r) in [("x", w.bounds.x), ("y", w.bounds.y), ("z", w.bounds.z)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[1] > r[0]) {
                e.push(format!("world.bounds.{axis} must be an increasing pair"));
            }
        }
        if w.voxel_res.contains(&0) {
            e.push("world.voxel_res must be at least 1 per axis".into());
        }
        let mut names = Vec::new();
        for (i, l) in w.layers.iter().enumerate() {
            let f = format!("world.layers[{i}]");
            if names.contains(&&l.name) {
                e.push(format!("{f}.name '{}' is not unique", l.name));
            }
            names.push(&l.name);
            if let Err(Error::Config(v)) = GridSpec::new(l.grid.nx, l.grid.ny, l.grid.x, l.grid.y) {
                e.extend(v.into_iter().map(|m| format!("{f}.grid: {m}")));
            }
            if let Some([dx, dy]) = l.kernel_lengths_m {
                if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
                    e.push(format!("{f}.kernel_lengths_m must be positive"));
                }
            }
            let mut roles = l.properties.clone();
            roles.sort();
            roles.dedup();
            if roles.len() != l.properties.len() {
                e.push(format!("{f}.properties lists a role twice"));
            }
            let n_ctrl = l.grid.nx * l.grid.ny;
            match &l.prior.control {
                ControlCov::Independent { sigma_m } | ControlCov::UniformOffdiag { sigma_m, .. }
                    if !(sigma_m.is_finite() && *sigma_m > 0.0) =>
                {
                    e.push(format!("{f}.prior.control.sigma_m must be positive, got {sigma_m}"));
                }
                ControlCov::UniformOffdiag { offdiag, .. } if !(*offdiag > -1.0 && *offdiag < 1.0) => {
                    e.push(format!("{f}.prior.control.offdiag must lie in (-1, 1), got {offdiag}"));
                }
                ControlCov::Matrix { matrix: m } if m.len() != n_ctrl || matrix(m).is_none() => {
                    e.push(format!("{f}.prior.control.matrix must be {n_ctrl}x{n_ctrl}"));
                }
                _ => {}
            }
            let n_prop = l.properties.len();
            match (&l.prior.properties, n_prop) {
                (None, 0) => {}
                (None, _) => e.push(format!("{f}.prior.properties is required for {n_prop} properties")),
                (Some(p), _) => {
                    if p.mean.len() != n_prop {
                        e.push(format!(
                            "{f}.prior.properties.mean has {} entries for {n_prop} properties",
                            p.mean.len()
                        ));
                    }
                    match &p.cov {
                        PropertyCov::Independent { sigma: Some(s) } => {
                            if s.len() != n_prop {
                                e.push(format!("{f}.prior.properties.cov.sigma needs {n_prop} entries"));
                            } else if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                                e.push(format!("{f}.prior.properties.cov.sigma must be positive"));
                            }
                        }
                        PropertyCov::Matrix { matrix: m } if m.len() != n_prop || matrix(m).is_none() => {
                            e.push(format!("{f}.prior.properties.cov.matrix must be {n_prop}x{n_prop}"));
                        }
                        _ => {}
                    }
                }
            }
        }
        let s = &self.sensors;
        if let Some(g) = &s.gravity {
            check_noise(&mut e, "sensors.gravity", &g.noise);
        }
        if let Some(m) = &s.magnetic {
            check_noise(&mut e, "sensors.magnetic", &m.noise);
            if !(m.field.magnitude_nt.is_finite() && m.field.magnitude_nt > 0.0) {
                e.push("sensors.magnetic.field.magnitude_nt must be positive".into());
            }
            if !(m.field.inclination_deg.is_finite() && m.field.declination_deg.is_finite()) {
                e.push("sensors.magnetic.field angles must be finite".into());
            }
        }
        if let Some(m) = &s.mt {
            check_noise(&mut e, "sensors.mt", &m.noise);
        }
        e.extend(self.sampler.problems());
        let o = &self.outputs;
        if !(0.0..1.0).contains(&o.burn_in_fraction) {
            e.push(format!("outputs.burn_in_fraction must lie in [0, 1), got {}", o.burn_in_fraction));
        }
        if let Some(t) = &o.target_layer {
            if !w.layers.iter().any(|l| &l.name == t) {
                e.push(format!("outputs.target_layer '{t}' names no layer"));
            }
        }
        for d in &o.slice_depths_m {
            if !(*d >= w.bounds.z[0] && *d <= w.bounds.z[1]) {
                e.push(format!("outputs.slice_depths_m: {d} lies outside world.bounds.z"));
            }
        }
        if o.max_posterior_samples == Some(0) {
            e.push("outputs.max_posterior_samples must be at least 1".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn target_layer_index(&self) -> Option<usize> {
        let t = self.outputs.target_layer.as_ref()?;
        self.world.layers.iter().position(|l| &l.name == t)
    }
}

/// A validated configuration with everything it references loaded.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub world: World,
    pub prior: GaussianPrior,
    pub observations: Vec<(Observations, NoiseHyper)>,
    /// SHA-256 over the sampling-relevant configuration and all input files.
    pub hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = RunConfig::from_json(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::assemble(config, base_dir)
    }

    pub fn assemble(config: RunConfig, base_dir: PathBuf) -> Result<Self> {
        config.validate()?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let mut inputs: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        let mut read = |p: &Path| -> Result<PathBuf> {
            let full = resolve(p);
            let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
            inputs.insert(p.display().to_string(), bytes);
            Ok(full)
        };

        let w = &config.world;
        let mut layers = Vec::with_capacity(w.layers.len());
        for l in &w.layers {
            let grid = GridSpec::new(l.grid.nx, l.grid.ny, l.grid.x, l.grid.y)?;
            let mean_depth = match &l.mean_depth {
                MeanDepthConfig::ConstantM(d) => MeanDepth::Constant(*d),
                MeanDepthConfig::Csv(p) => MeanDepth::Table(DepthTable::from_points(&read_depth_csv(&read(p)?)?)?),
            };
            let mut spec = LayerSpec::new(l.name.clone(), grid, mean_depth, l.properties.clone());
            if let Some([dx, dy]) = l.kernel_lengths_m {
                spec.delta_x = dx;
                spec.delta_y = dy;
            }
            layers.push(spec);
        }
        let world = World::new(WorldSpec {
            layers,
            bounds: w.bounds,
            voxel_res: w.voxel_res,
            margin: w.margin_m,
        })?;
        let prior = build_prior(&config)?;

        let mut observations = Vec::new();
        let s = &config.sensors;
        if let Some(g) = &s.gravity {
            let (points, values) = load_potential_csv(&read(&g.file)?)?;
            observations.push((Observations::Gravity { points, values }, g.noise));
        }
        if let Some(m) = &s.magnetic {
            let (points, values) = load_potential_csv(&read(&m.file)?)?;
            observations.push((
                Observations::Magnetic {
                    points,
                    values,
                    field: m.field,
                },
                m.noise,
            ));
        }
        if let Some(m) = &s.mt {
            let records = load_mt_csv(&read(&m.file)?)?;
            observations.push((Observations::Mt { records }, m.noise));
        }

        let hash = config_hash(&config, &inputs)?;
        Ok(LoadedConfig {
            config,
            base_dir,
            world,
            prior,
            observations,
            hash,
        })
    }

    pub fn inversion(&self) -> Result<Inversion> {
        Inversion::new(
            self.world.clone(),
            self.prior.clone(),
            &self.observations,
            self.config.world.edge_pad_cells,
        )
    }

    pub fn output_dir(&self) -> PathBuf {
        let d = &self.config.outputs.directory;
        if d.is_absolute() {
            d.clone()
        } else {
            self.base_dir.join(d)
        }
    }
}

/// Control blocks for every layer, then property blocks for every layer.
pub fn build_prior(config: &RunConfig) -> Result<GaussianPrior> {
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    for (i, l) in config.world.layers.iter().enumerate() {
        let n = l.grid.nx * l.grid.ny;
        let cov = match &l.prior.control {
            ControlCov::Independent { sigma_m } => independent_cov(&vec![*sigma_m; n]),
            ControlCov::UniformOffdiag { sigma_m, offdiag } => uniform_offdiag(n, *sigma_m, *offdiag),
            ControlCov::Matrix { matrix: m } => {
                matrix(m).ok_or_else(|| Error::config(format!("world.layers[{i}].prior.control.matrix is not square")))?
            }
        };
        blocks.push((vec![0.0; n], cov));
        labels.push(format!("world.layers[{i}].prior.control"));
    }
    for (i, l) in config.world.layers.iter().enumerate() {
        let Some(p) = &l.prior.properties else { continue };
        if l.properties.is_empty() {
            continue;
        }
        let cov = match &p.cov {
            PropertyCov::Independent { sigma } => {
                let s = sigma.clone().unwrap_or_else(|| {
                    l.properties.iter().map(|r| default_property_sigma(*r)).collect()
                });
                independent_cov(&s)
            }
            PropertyCov::Matrix { matrix: m } => matrix(m)
                .ok_or_else(|| Error::config(format!("world.layers[{i}].prior.properties.cov.matrix is not square")))?,
        };
        blocks.push((p.mean.clone(), cov));
        labels.push(format!("world.layers[{i}].prior.properties"));
    }
    GaussianPrior::new(blocks).map_err(|e| match e {
        Error::Config(v) => Error::Config(
            v.into_iter()
                .map(|m| relabel(&m, &labels))
                .collect(),
        ),
        other => other,
    })
}

fn relabel(msg: &str, labels: &[String]) -> String {
    if let Some(rest) = msg.strip_prefix("prior block ") {
        if let Some((idx, tail)) = rest.split_once(':') {
            if let Some(l) = idx.parse::<usize>().ok().and_then(|i| labels.get(i)) {
                return format!("{l}:{tail}");
            }
        }
    }
    msg.to_string()
}

/// Hash of everything that determines the sample stream: the config minus
/// output settings, plus the bytes of every input file.
pub fn config_hash(config: &RunConfig, inputs: &BTreeMap<String, Vec<u8>>) -> Result<String> {
    let mut v = serde_json::to_value(config)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("outputs");
    }
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&v)?);
    for (name, bytes) in inputs {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
