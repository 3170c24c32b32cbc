//! Forward models from a voxelised world to predicted sensor readings.

pub mod mt;
pub mod prism;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{PropertyRole, VoxelGeometry, VoxelModel};

pub use mt::{layered_impedance, mt1d_forward, MtConfig, MtForward, MtPoint};

/// Gravitational constant, m^3 kg^-1 s^-2.
pub const G: f64 = 6.674_30e-11;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
const SI_TO_MGAL: f64 = 1e5;
const GCC_TO_KGM3: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Gravity,
    Magnetic,
    Mt,
}

impl SensorKind {
    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Gravity => "gravity",
            SensorKind::Magnetic => "magnetic",
            SensorKind::Mt => "mt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorLocations {
    pub kind: SensorKind,
    /// `(x, y, z)` in metres, z positive down.
    pub points: Vec<[f64; 3]>,
}

impl SensorLocations {
    pub fn new(kind: SensorKind, points: Vec<[f64; 3]>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("sensor point {i} is not finite")));
            }
            if kind != SensorKind::Mt && p[2] > 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sensor point {i} lies below the surface (z = {} m)",
                    p[2]
                )));
            }
        }
        Ok(SensorLocations { kind, points })
    }
}

/// Per-voxel linear sensitivities, stored as running sums down each
/// column. A piecewise-constant column then costs one vector update per
/// change of value.
#[derive(Debug, Clone)]
pub struct LinearKernel {
    geometry: VoxelGeometry,
    n_obs: usize,
    /// `[column][iz][obs]`: sum of the sensitivities of cells `0..=iz`.
    cumulative: Vec<f64>,
    /// Sum over columns of the whole-column sensitivity, per observation.
    column_total: Vec<f64>,
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

impl LinearKernel {
    /// Builds the kernel by evaluating `cell(obs, prism)` for every pair.
    pub fn build<F>(geometry: VoxelGeometry, points: &[[f64; 3]], cell: F) -> Result<Self>
    where
        F: Fn([f64; 3], &prism::Prism) -> Option<f64> + Sync,
    {
        Self::build_padded(geometry, 0, points, cell)
    }

    /// Builds the kernel over `geometry` extended by `pad` edge-copied
    /// columns on each side, folding each padding column into the edge
    /// column it copies.
    pub fn build_padded<F>(geometry: VoxelGeometry, pad: usize, points: &[[f64; 3]], cell: F) -> Result<Self>
    where
        F: Fn([f64; 3], &prism::Prism) -> Option<f64> + Sync,
    {
        let outer = geometry.padded(pad);
        let [nx, ny, nz] = geometry.dims;
        let n_obs = points.len();
        let n_cols = geometry.n_columns();
        // [obs][inner column][iz] per-cell sums while building
        let rows: Vec<Result<Vec<f64>>> = points
            .par_iter()
            .enumerate()
            .map(|(index, &obs)| {
                let mut row = vec![0.0; n_cols * nz];
                for oy in 0..outer.dims[1] {
                    for ox in 0..outer.dims[0] {
                        let ix = ox.saturating_sub(pad).min(nx - 1);
                        let iy = oy.saturating_sub(pad).min(ny - 1);
                        let base = (iy * nx + ix) * nz;
                        for iz in 0..nz {
                            let p = outer.prism(ox, oy, iz);
                            if prism::is_inside(obs, &p) {
                                return Err(Error::KernelSingularity { index });
                            }
                            let v = cell(obs, &p)
                                .filter(|v| v.is_finite())
                                .ok_or(Error::KernelSingularity { index })?;
                            row[base + iz] += v;
                        }
                    }
                }
                Ok(row)
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let mut cumulative = vec![0.0; n_cols * nz * n_obs];
        let mut column_total = vec![0.0; n_obs];
        for (o, row) in rows.iter().enumerate() {
            for col in 0..n_cols {
                let mut acc = 0.0;
                for iz in 0..nz {
                    acc += row[col * nz + iz];
                    cumulative[(col * nz + iz) * n_obs + o] = acc;
                }
                column_total[o] += acc;
            }
        }
        Ok(LinearKernel {
            geometry,
            n_obs,
            cumulative,
            column_total,
        })
    }

    pub fn geometry(&self) -> &VoxelGeometry {
        &self.geometry
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn running(&self, col: usize, iz: usize) -> &[f64] {
        let nz = self.geometry.dims[2];
        let start = (col * nz + iz) * self.n_obs;
        &self.cumulative[start..start + self.n_obs]
    }

    /// Sensitivity of observation `obs` to the voxel `index`.
    pub fn sensitivity(&self, obs: usize, index: usize) -> f64 {
        let nz = self.geometry.dims[2];
        let (col, iz) = (index / nz, index % nz);
        let above = if iz == 0 { 0.0 } else { self.running(col, iz - 1)[obs] };
        self.running(col, iz)[obs] - above
    }

    /// `K * grid` for a property grid laid out like `VoxelModel`.
    pub fn apply(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let g = &self.geometry;
        let nz = g.dims[2];
        if grid.len() != g.n_voxels() {
            return Err(Error::InvalidInput(format!(
                "property grid has {} voxels, kernel expects {}",
                grid.len(),
                g.n_voxels()
            )));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("property grid has non-finite values".into()));
        }
        // sum_iz v_iz (C_iz - C_{iz-1}) = sum_iz (v_iz - v_{iz+1}) C_iz, v_nz = 0;
        // the bottom terms share a reference value applied to the column total
        let reference = grid[nz - 1];
        let mut out: Vec<f64> = self.column_total.iter().map(|t| reference * t).collect();
        for col in 0..g.n_columns() {
            let cells = &grid[col * nz..(col + 1) * nz];
            for iz in 0..nz - 1 {
                let step = cells[iz] - cells[iz + 1];
                if step != 0.0 {
                    axpy(&mut out, step, self.running(col, iz));
                }
            }
            let bottom = cells[nz - 1] - reference;
            if bottom != 0.0 {
                axpy(&mut out, bottom, self.running(col, nz - 1));
            }
        }
        Ok(out)
    }
}

fn center(mut v: Vec<f64>) -> Vec<f64> {
    if v.is_empty() {
        return v;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= m;
    }
    v
}

fn check_geometry(model: &VoxelModel, kernel: &LinearKernel) -> Result<()> {
    if model.geometry != *kernel.geometry() {
        return Err(Error::InvalidInput(
            "voxel model geometry differs from the kernel geometry".into(),
        ));
    }
    Ok(())
}

/// Gravity anomaly forward model (mGal per g/cm^3 sensitivities).
#[derive(Debug, Clone)]
pub struct GravityForward {
    kernel: LinearKernel,
}

impl GravityForward {
    pub fn new(geometry: VoxelGeometry, loc: &SensorLocations) -> Result<Self> {
        Self::padded(geometry, 0, loc)
    }

    /// Response of the model extended by `pad` edge-copied columns.
    pub fn padded(geometry: VoxelGeometry, pad: usize, loc: &SensorLocations) -> Result<Self> {
        let scale = G * GCC_TO_KGM3 * SI_TO_MGAL;
        let kernel = LinearKernel::build_padded(geometry, pad, &loc.points, |obs, p| {
            Some(scale * prism::vertical_attraction(obs, p))
        })?;
        Ok(GravityForward { kernel })
    }

    pub fn kernel(&self) -> &LinearKernel {
        &self.kernel
    }

    /// Uncentred response to a density grid, mGal.
    pub fn response(&self, density: &[f64]) -> Result<Vec<f64>> {
        self.kernel.apply(density)
    }

    /// Mean-centred gravity anomaly, mGal.
    pub fn predict(&self, model: &VoxelModel) -> Result<Vec<f64>> {
        check_geometry(model, &self.kernel)?;
        let density = model
            .property(PropertyRole::Density)
            .ok_or_else(|| Error::InvalidInput("model has no density grid".into()))?;
        Ok(center(self.response(density)?))
    }
}

/// Inducing geomagnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InducingField {
    pub magnitude_nt: f64,
    /// Positive down.
    pub inclination_deg: f64,
    /// Clockwise from north (+y) towards east (+x).
    pub declination_deg: f64,
}

impl InducingField {
    pub fn direction(&self) -> [f64; 3] {
        let (i, d) = (
            self.inclination_deg.to_radians(),
            self.declination_deg.to_radians(),
        );
        [i.cos() * d.sin(), i.cos() * d.cos(), i.sin()]
    }
}

/// Total-magnetic-intensity forward model for induced magnetisation.
#[derive(Debug, Clone)]
pub struct MagneticForward {
    kernel: LinearKernel,
    field: InducingField,
}

impl MagneticForward {
    pub fn new(geometry: VoxelGeometry, loc: &SensorLocations, field: InducingField) -> Result<Self> {
        Self::padded(geometry, 0, loc, field)
    }

    /// Response of the model extended by `pad` edge-copied columns.
    pub fn padded(geometry: VoxelGeometry, pad: usize, loc: &SensorLocations, field: InducingField) -> Result<Self> {
        if !(field.magnitude_nt.is_finite() && field.magnitude_nt > 0.0) {
            return Err(Error::config("inducing field magnitude must be positive"));
        }
        let f = field.direction();
        // Delta T = chi |B0| / (4 pi) * f^T H f
        let scale = field.magnitude_nt / (4.0 * std::f64::consts::PI);
        let kernel = LinearKernel::build_padded(geometry, pad, &loc.points, |obs, p| {
            let h = prism::potential_hessian(obs, p)?;
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    q += f[i] * h[i][j] * f[j];
                }
            }
            Some(scale * q)
        })?;
        Ok(MagneticForward { kernel, field })
    }

    pub fn kernel(&self) -> &LinearKernel {
        &self.kernel
    }

    pub fn field(&self) -> &InducingField {
        &self.field
    }

    /// Uncentred TMI for a grid of SI susceptibilities, nT.
    pub fn response(&self, susceptibility: &[f64]) -> Result<Vec<f64>> {
        self.kernel.apply(susceptibility)
    }

    /// Mean-centred TMI anomaly, nT. The model stores log10 susceptibility.
    pub fn predict(&self, model: &VoxelModel) -> Result<Vec<f64>> {
        check_geometry(model, &self.kernel)?;
        let log_chi = model
            .property(PropertyRole::LogSusceptibility)
            .ok_or_else(|| Error::InvalidInput("model has no susceptibility grid".into()))?;
        let chi: Vec<f64> = log_chi.iter().map(|v| 10f64.powf(*v)).collect();
        Ok(center(self.response(&chi)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn single_cube_model(size: f64, value: f64, role: PropertyRole) -> VoxelModel {
        let geometry = VoxelGeometry {
            origin: [-size / 2.0, -size / 2.0, 0.0],
            cell: [size; 3],
            dims: [1, 1, 1],
        };
        VoxelModel {
            geometry,
            occupancy: vec![0],
            properties: BTreeMap::from([(role, vec![value])]),
        }
    }

    #[test]
    fn kernel_matches_direct_voxel_sum() {
        let g = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [100.0, 80.0, 50.0],
            dims: [3, 2, 5],
        };
        let pts = vec![[10.0, 20.0, -1.0], [250.0, 140.0, -3.0]];
        let loc = SensorLocations::new(SensorKind::Gravity, pts).unwrap();
        let f = GravityForward::new(g, &loc).unwrap();
        let grid: Vec<f64> = (0..g.n_voxels()).map(|i| [2.1, 2.1, 2.7, 3.0][i % 4]).collect();
        let fast = f.response(&grid).unwrap();
        for (o, v) in fast.iter().enumerate() {
            let direct: f64 = (0..g.n_voxels()).map(|i| grid[i] * f.kernel().sensitivity(o, i)).sum();
            assert!((v - direct).abs() < 1e-12 * direct.abs().max(1.0), "{v} vs {direct}");
        }
    }

    #[test]
    fn folded_padding_equals_explicit_margins() {
        let g = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [100.0, 100.0, 50.0],
            dims: [3, 4, 6],
        };
        let pts: Vec<[f64; 3]> = (0..5).map(|i| [30.0 + 60.0 * i as f64, 170.0, -2.0]).collect();
        let loc = SensorLocations::new(SensorKind::Gravity, pts).unwrap();
        let occupancy: Vec<u16> = (0..g.n_voxels()).map(|i| ((i % 6) > (i / 6) % 4) as u16).collect();
        let density: Vec<f64> = occupancy.iter().map(|&o| [2.2, 2.9][o as usize]).collect();
        let model = VoxelModel {
            geometry: g,
            occupancy,
            properties: BTreeMap::from([(PropertyRole::Density, density)]),
        };
        let folded = GravityForward::padded(g, 2, &loc).unwrap().predict(&model).unwrap();
        let wide = crate::world::extend_margins(&model, 2);
        let explicit = GravityForward::new(wide.geometry, &loc).unwrap().predict(&wide).unwrap();
        for (a, b) in folded.iter().zip(&explicit) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_density_centres_to_zero() {
        let geometry = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [100.0, 100.0, 50.0],
            dims: [4, 4, 4],
        };
        let pts: Vec<[f64; 3]> = (0..6).map(|i| [i as f64 * 70.0, 150.0, -1.0]).collect();
        let loc = SensorLocations::new(SensorKind::Gravity, pts).unwrap();
        let fwd = GravityForward::new(geometry, &loc).unwrap();
        let model = VoxelModel {
            geometry,
            occupancy: vec![0; 64],
            properties: BTreeMap::from([(PropertyRole::Density, vec![0.0; 64])]),
        };
        assert!(fwd.predict(&model).unwrap().iter().all(|v| *v == 0.0));
        let model = VoxelModel {
            properties: BTreeMap::from([(PropertyRole::Density, vec![2.67; 64])]),
            ..model
        };
        // a finite block is not laterally uniform, so only the mean vanishes
        let p = fwd.predict(&model).unwrap();
        assert!(p.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn point_mass_far_field() {
        let model = single_cube_model(100.0, 1.0, PropertyRole::Density);
        let h = 10.0 * 100.0;
        let loc = SensorLocations::new(SensorKind::Gravity, vec![[0.0, 0.0, 50.0 - h]]).unwrap();
        let fwd = GravityForward::new(model.geometry, &loc).unwrap();
        let g = fwd.response(&[1.0]).unwrap()[0];
        let point = G * 1000.0 * 1e6 / (h * h) * 1e5;
        assert!(((g - point) / point).abs() < 1e-3, "{g} vs {point}");
    }

    #[test]
    fn dipole_far_field_on_axis() {
        let field = InducingField {
            magnitude_nt: 50_000.0,
            inclination_deg: 60.0,
            declination_deg: 10.0,
        };
        let chi: f64 = 0.01;
        let model = single_cube_model(100.0, chi.log10(), PropertyRole::LogSusceptibility);
        let f = field.direction();
        let r = 1000.0;
        // observer on the field axis, up-going side
        let obs = [-r * f[0], -r * f[1], 50.0 - r * f[2]];
        let loc = SensorLocations::new(SensorKind::Magnetic, vec![obs]).unwrap();
        let fwd = MagneticForward::new(model.geometry, &loc, field).unwrap();
        let t = fwd.response(&[chi]).unwrap()[0];
        let dipole = 2.0 * chi * field.magnitude_nt * 1e6 / (4.0 * std::f64::consts::PI * r.powi(3));
        assert!(((t - dipole) / dipole).abs() < 5e-3, "{t} vs {dipole}");
    }

    #[test]
    fn zero_susceptibility_gives_zero() {
        let geometry = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [100.0; 3],
            dims: [2, 2, 2],
        };
        let loc = SensorLocations::new(SensorKind::Magnetic, vec![[55.0, 33.0, -10.0]]).unwrap();
        let f = InducingField {
            magnitude_nt: 55_000.0,
            inclination_deg: -65.0,
            declination_deg: 5.0,
        };
        let fwd = MagneticForward::new(geometry, &loc, f).unwrap();
        assert_eq!(fwd.response(&[0.0; 8]).unwrap(), vec![0.0]);
    }

    #[test]
    fn observer_inside_prism_is_rejected() {
        let geometry = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [100.0; 3],
            dims: [2, 2, 2],
        };
        let loc = SensorLocations {
            kind: SensorKind::Gravity,
            points: vec![[0.0, 0.0, -1.0], [150.0, 150.0, 150.0]],
        };
        let err = GravityForward::new(geometry, &loc).unwrap_err();
        assert!(matches!(err, Error::KernelSingularity { index: 1 }));
    }

    #[test]
    fn sensors_below_surface_rejected() {
        assert!(SensorLocations::new(SensorKind::Gravity, vec![[0.0, 0.0, 5.0]]).is_err());
    }
}
