//! Layered world parametrization and voxelisation.
//!
//! A world is an ordered stack of layers. Each layer's top surface is a
//! mean-depth field plus a Gaussian-process interpolation of control-point
//! depth offsets; each layer carries spatially constant rock properties.
//! Depth is positive down throughout.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JITTER_REL: f64 = 1e-8;
const JITTER_MAX_REL: f64 = 1e-4;

/// Regular lattice of control sites, x varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        let grid = GridSpec {
            nx,
            ny,
            x0: x[0],
            y0: y[0],
            x1: x[1],
            y1: y[1],
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::config("control grid needs at least one point per axis"));
        }
        if !(self.x1 > self.x0 && self.y1 > self.y0) {
            return Err(Error::config("control grid bounds must satisfy x1 > x0 and y1 > y0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axis(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    pub fn sites(&self) -> Vec<[f64; 2]> {
        let xs = Self::axis(self.nx, self.x0, self.x1);
        let ys = Self::axis(self.ny, self.y0, self.y1);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| [x, y]))
            .collect()
    }

    /// Spacing between adjacent control sites; a single-site axis uses its
    /// full extent.
    pub fn spacing(&self) -> (f64, f64) {
        let dx = if self.nx > 1 {
            (self.x1 - self.x0) / (self.nx - 1) as f64
        } else {
            self.x1 - self.x0
        };
        let dy = if self.ny > 1 {
            (self.y1 - self.y0) / (self.ny - 1) as f64
        } else {
            self.y1 - self.y0
        };
        (dx, dy)
    }
}

/// Rectilinear depth table, bilinearly interpolated and clamped at its edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major with x fastest: `values[j * xs.len() + i]`.
    values: Vec<f64>,
}

impl DepthTable {
    /// Builds a table from scattered `(x, y, depth)` rows that must form a
    /// complete rectilinear grid.
    pub fn from_points(points: &[(f64, f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty mean-depth table".into()));
        }
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        for v in xs.iter().chain(ys.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite mean-depth coordinate".into()));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let mut values = vec![f64::NAN; xs.len() * ys.len()];
        for &(x, y, d) in points {
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite mean depth at ({x}, {y})"
                )));
            }
            let i = xs.binary_search_by(|v| v.total_cmp(&x)).unwrap();
            let j = ys.binary_search_by(|v| v.total_cmp(&y)).unwrap();
            values[j * xs.len() + i] = d;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput(
                "mean-depth table is not a complete rectilinear grid".into(),
            ));
        }
        Ok(DepthTable { xs, ys, values })
    }

    fn bracket(axis: &[f64], v: f64) -> (usize, usize, f64) {
        if axis.len() == 1 || v <= axis[0] {
            return (0, 0, 0.0);
        }
        let last = axis.len() - 1;
        if v >= axis[last] {
            return (last, last, 0.0);
        }
        let hi = axis.partition_point(|&a| a <= v);
        let lo = hi - 1;
        (lo, hi, (v - axis[lo]) / (axis[hi] - axis[lo]))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (i0, i1, tx) = Self::bracket(&self.xs, x);
        let (j0, j1, ty) = Self::bracket(&self.ys, y);
        let n = self.xs.len();
        let v = |i: usize, j: usize| self.values[j * n + i];
        let bottom = v(i0, j0) * (1.0 - tx) + v(i1, j0) * tx;
        let top = v(i0, j1) * (1.0 - tx) + v(i1, j1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    pub fn covers(&self, x: [f64; 2], y: [f64; 2]) -> bool {
        self.xs[0] <= x[0]
            && *self.xs.last().unwrap() >= x[1]
            && self.ys[0] <= y[0]
            && *self.ys.last().unwrap() >= y[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanDepth {
    Constant(f64),
    Table(DepthTable),
}

impl MeanDepth {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            MeanDepth::Constant(d) => *d,
            MeanDepth::Table(t) => t.eval(x, y),
        }
    }

    /// Adds a constant to every depth.
    pub fn shifted(&self, dz: f64) -> MeanDepth {
        match self {
            MeanDepth::Constant(d) => MeanDepth::Constant(d + dz),
            MeanDepth::Table(t) => MeanDepth::Table(DepthTable {
                xs: t.xs.clone(),
                ys: t.ys.clone(),
                values: t.values.iter().map(|v| v + dz).collect(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyRole {
    /// g/cm^3
    Density,
    /// log10 of SI volume susceptibility
    LogSusceptibility,
    /// log10 of resistivity in ohm-m
    LogResistivity,
}

impl PropertyRole {
    pub fn unit(self) -> &'static str {
        match self {
            PropertyRole::Density => "g/cm^3",
            PropertyRole::LogSusceptibility => "log10(SI)",
            PropertyRole::LogResistivity => "log10(ohm-m)",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyRole::Density => "density",
            PropertyRole::LogSusceptibility => "log_susceptibility",
            PropertyRole::LogResistivity => "log_resistivity",
        }
    }
}

impl fmt::Display for PropertyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub grid: GridSpec,
    pub mean_depth: MeanDepth,
    pub delta_x: f64,
    pub delta_y: f64,
    pub properties: Vec<PropertyRole>,
}

impl LayerSpec {
    /// Layer whose kernel lengths equal the control-site spacing.
    pub fn new(
        name: impl Into<String>,
        grid: GridSpec,
        mean_depth: MeanDepth,
        properties: Vec<PropertyRole>,
    ) -> Self {
        let (delta_x, delta_y) = grid.spacing();
        LayerSpec {
            name: name.into(),
            grid,
            mean_depth,
            delta_x,
            delta_y,
            properties,
        }
    }

    pub fn property_index(&self, role: PropertyRole) -> Option<usize> {
        self.properties.iter().position(|&r| r == role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub layers: Vec<LayerSpec>,
    /// Lateral survey footprint and depth range; the modelled volume is
    /// this footprint padded by `margin` on every lateral side.
    pub bounds: Bounds,
    pub voxel_res: [usize; 3],
    pub margin: f64,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.layers.is_empty() {
            errs.push("world needs at least one layer".to_string());
        }
        if self.voxel_res.iter().any(|&n| n == 0) {
            errs.push("voxel counts must be at least 1 per axis".to_string());
        }
        if !(self.margin >= 0.0) {
            errs.push("margin must be non-negative".to_string());
        }
        let b = &self.bounds;
        for (axis, r) in [("x", b.x), ("y", b.y), ("z", b.z)] {
            if !(r[1] > r[0]) {
                errs.push(format!("bounds.{axis} must be increasing"));
            }
        }
        let vol = self.volume();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Err(Error::Config(e)) = layer.grid.validate() {
                errs.extend(e.into_iter().map(|m| format!("layers[{i}]: {m}")));
            }
            if !(layer.delta_x > 0.0 && layer.delta_y > 0.0) {
                errs.push(format!("layers[{i}]: kernel lengths must be positive"));
            }
            if let MeanDepth::Table(t) = &layer.mean_depth {
                if !t.covers(vol.x, vol.y) {
                    errs.push(format!(
                        "layers[{i}]: mean-depth table does not cover the volume"
                    ));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// The modelled volume: survey bounds plus lateral margin.
    pub fn volume(&self) -> Bounds {
        let m = self.margin;
        Bounds {
            x: [self.bounds.x[0] - m, self.bounds.x[1] + m],
            y: [self.bounds.y[0] - m, self.bounds.y[1] + m],
            z: self.bounds.z,
        }
    }

    pub fn geometry(&self) -> VoxelGeometry {
        let v = self.volume();
        let [nx, ny, nz] = self.voxel_res;
        VoxelGeometry {
            origin: [v.x[0], v.y[0], v.z[0]],
            cell: [
                (v.x[1] - v.x[0]) / nx as f64,
                (v.y[1] - v.y[0]) / ny as f64,
                (v.z[1] - v.z[0]) / nz as f64,
            ],
            dims: self.voxel_res,
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn roles(&self) -> Vec<PropertyRole> {
        let mut roles: Vec<PropertyRole> = self
            .layers
            .iter()
            .flat_map(|l| l.properties.iter().copied())
            .collect();
        roles.sort();
        roles.dedup();
        roles
    }
}

/// Offsets of each block inside the flat parameter vector. Control-point
/// offsets for all layers come first, then rock properties for all layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub alpha: Vec<std::ops::Range<usize>>,
    pub rho: Vec<std::ops::Range<usize>>,
    pub dim: usize,
}

impl ParamLayout {
    fn new(spec: &WorldSpec) -> Self {
        let mut next = 0;
        let mut alpha = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            alpha.push(next..next + l.grid.len());
            next += l.grid.len();
        }
        let mut rho = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            rho.push(next..next + l.properties.len());
            next += l.properties.len();
        }
        ParamLayout {
            alpha,
            rho,
            dim: next,
        }
    }

    /// `(name, unit)` per flat parameter.
    pub fn names(&self, spec: &WorldSpec) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.dim);
        for l in &spec.layers {
            for j in 0..l.grid.ny {
                for i in 0..l.grid.nx {
                    out.push((format!("{}.alpha[{i},{j}]", l.name), "m".to_string()));
                }
            }
        }
        for l in &spec.layers {
            for r in &l.properties {
                out.push((format!("{}.{}", l.name, r.name()), r.unit().to_string()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    pub alpha: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
}

impl WorldParams {
    pub fn unpack(layout: &ParamLayout, theta: &[f64]) -> Result<Self> {
        if theta.len() != layout.dim {
            return Err(Error::InvalidInput(format!(
                "parameter vector has {} entries, expected {}",
                theta.len(),
                layout.dim
            )));
        }
        Ok(WorldParams {
            alpha: layout.alpha.iter().map(|r| theta[r.clone()].to_vec()).collect(),
            rho: layout.rho.iter().map(|r| theta[r.clone()].to_vec()).collect(),
        })
    }

    pub fn pack(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .chain(self.rho.iter())
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    fn check(&self, spec: &WorldSpec) -> Result<()> {
        let ok = self.alpha.len() == spec.layers.len()
            && self.rho.len() == spec.layers.len()
            && spec.layers.iter().enumerate().all(|(i, l)| {
                self.alpha[i].len() == l.grid.len() && self.rho[i].len() == l.properties.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "world parameters do not match the world specification".into(),
            ))
        }
    }
}

pub fn rbf_kernel(p: [f64; 2], q: [f64; 2], delta_x: f64, delta_y: f64) -> Result<f64> {
    if !(p.iter().chain(q.iter()).all(|v| v.is_finite())) {
        return Err(Error::InvalidInput("non-finite kernel coordinate".into()));
    }
    if !(delta_x > 0.0 && delta_y > 0.0) {
        return Err(Error::InvalidInput("kernel lengths must be positive".into()));
    }
    Ok(rbf(p, q, delta_x, delta_y))
}

#[inline]
fn rbf(p: [f64; 2], q: [f64; 2], dx: f64, dy: f64) -> f64 {
    let ex = (p[0] - q[0]) / dx;
    let ey = (p[1] - q[1]) / dy;
    (-ex * ex - ey * ey).exp()
}

/// Noiseless GP over one layer's control sites with a cached Gram factor.
#[derive(Debug, Clone)]
pub struct LayerGp {
    sites: Vec<[f64; 2]>,
    delta: (f64, f64),
    factor: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl LayerGp {
    pub fn new(layer: &LayerSpec) -> Result<Self> {
        let sites = layer.grid.sites();
        let n = sites.len();
        let (dx, dy) = (layer.delta_x, layer.delta_y);
        let gram = DMatrix::from_fn(n, n, |i, j| rbf(sites[i], sites[j], dx, dy));
        let scale = gram.trace() / n as f64;
        let mut rel = JITTER_REL;
        loop {
            let jitter = rel * scale;
            let shifted = &gram + DMatrix::identity(n, n) * jitter;
            if let Some(factor) = shifted.cholesky() {
                return Ok(LayerGp {
                    sites,
                    delta: (dx, dy),
                    factor,
                    jitter,
                });
            }
            rel *= 10.0;
            if rel > JITTER_MAX_REL * (1.0 + 1e-9) {
                return Err(Error::Conditioning(format!(
                    "control-point Gram matrix of layer '{}' is not positive definite",
                    layer.name
                )));
            }
        }
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    /// `(K + eps I)^-1 alpha`
    pub fn weights(&self, alpha: &[f64]) -> DVector<f64> {
        self.factor.solve(&DVector::from_column_slice(alpha))
    }

    pub fn cross(&self, q: [f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.sites.len(),
            self.sites.iter().map(|&s| rbf(q, s, self.delta.0, self.delta.1)),
        )
    }
}

/// Boundary depth of `layer` at each query point for the given offsets.
pub fn interpolate_boundary(
    layer: &LayerSpec,
    alpha: &[f64],
    query: &[[f64; 2]],
) -> Result<Vec<f64>> {
    if alpha.len() != layer.grid.len() {
        return Err(Error::InvalidInput(format!(
            "layer '{}' expects {} control offsets, got {}",
            layer.name,
            layer.grid.len(),
            alpha.len()
        )));
    }
    if query.iter().any(|q| !(q[0].is_finite() && q[1].is_finite())) {
        return Err(Error::InvalidInput("non-finite query point".into()));
    }
    let gp = LayerGp::new(layer)?;
    let w = gp.weights(alpha);
    Ok(query
        .iter()
        .map(|&q| layer.mean_depth.eval(q[0], q[1]) + gp.cross(q).dot(&w))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGeometry {
    /// Corner of the volume with minimum x, y and depth.
    pub origin: [f64; 3],
    pub cell: [f64; 3],
    pub dims: [usize; 3],
}

impl VoxelGeometry {
    pub fn n_columns(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Flat index; voxels of a column are contiguous in depth.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iy * self.dims[0] + ix) * self.dims[2] + iz
    }

    pub fn column_center(&self, column: usize) -> [f64; 2] {
        let ix = column % self.dims[0];
        let iy = column / self.dims[0];
        [
            self.origin[0] + (ix as f64 + 0.5) * self.cell[0],
            self.origin[1] + (iy as f64 + 0.5) * self.cell[1],
        ]
    }

    pub fn z_center(&self, iz: usize) -> f64 {
        self.origin[2] + (iz as f64 + 0.5) * self.cell[2]
    }

    /// Column containing lateral point `(x, y)`, clamped to the volume.
    pub fn column_at(&self, x: f64, y: f64) -> usize {
        let clamp = |v: f64, o: f64, c: f64, n: usize| {
            let i = ((v - o) / c).floor();
            if i < 0.0 {
                0
            } else {
                (i as usize).min(n - 1)
            }
        };
        let ix = clamp(x, self.origin[0], self.cell[0], self.dims[0]);
        let iy = clamp(y, self.origin[1], self.cell[1], self.dims[1]);
        iy * self.dims[0] + ix
    }

    /// Depth slice nearest to `depth`.
    pub fn z_index_at(&self, depth: f64) -> Option<usize> {
        let top = self.origin[2];
        let bottom = top + self.cell[2] * self.dims[2] as f64;
        if !(depth >= top && depth <= bottom) {
            return None;
        }
        let i = ((depth - top) / self.cell[2]).round() as usize;
        Some(i.min(self.dims[2] - 1))
    }

    /// Same cells extended by `pad` columns on every lateral side.
    pub fn padded(&self, pad: usize) -> VoxelGeometry {
        let p = pad as f64;
        VoxelGeometry {
            origin: [
                self.origin[0] - p * self.cell[0],
                self.origin[1] - p * self.cell[1],
                self.origin[2],
            ],
            cell: self.cell,
            dims: [self.dims[0] + 2 * pad, self.dims[1] + 2 * pad, self.dims[2]],
        }
    }

    /// Prism extents `[[x0,x1],[y0,y1],[z0,z1]]` of a voxel.
    pub fn prism(&self, ix: usize, iy: usize, iz: usize) -> [[f64; 2]; 3] {
        let lo = |a: usize, i: usize| self.origin[a] + i as f64 * self.cell[a];
        [
            [lo(0, ix), lo(0, ix + 1)],
            [lo(1, iy), lo(1, iy + 1)],
            [lo(2, iz), lo(2, iz + 1)],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelModel {
    pub geometry: VoxelGeometry,
    /// Zero-based layer index per voxel.
    pub occupancy: Vec<u16>,
    /// One grid per property role; NaN where the occupying layer lacks the role.
    pub properties: BTreeMap<PropertyRole, Vec<f64>>,
}

impl VoxelModel {
    pub fn property(&self, role: PropertyRole) -> Option<&[f64]> {
        self.properties.get(&role).map(Vec::as_slice)
    }

    pub fn column(&self, column: usize) -> std::ops::Range<usize> {
        let nz = self.geometry.dims[2];
        column * nz..(column + 1) * nz
    }
}

/// World specification with cached GP factors and column interpolation
/// weights. Immutable after construction.
#[derive(Debug, Clone)]
pub struct World {
    spec: WorldSpec,
    layout: ParamLayout,
    geometry: VoxelGeometry,
    gps: Vec<LayerGp>,
    /// Per layer: mean depth at every column centre.
    column_mean: Vec<Vec<f64>>,
    /// Per layer: kernel between column centres (rows) and control sites.
    column_cross: Vec<DMatrix<f64>>,
}

impl World {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        spec.validate()?;
        let geometry = spec.geometry();
        let centers: Vec<[f64; 2]> = (0..geometry.n_columns())
            .map(|c| geometry.column_center(c))
            .collect();
        let mut gps = Vec::with_capacity(spec.layers.len());
        let mut column_mean = Vec::with_capacity(spec.layers.len());
        let mut column_cross = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let gp = LayerGp::new(layer)?;
            column_mean.push(
                centers
                    .iter()
                    .map(|c| layer.mean_depth.eval(c[0], c[1]))
                    .collect(),
            );
            let sites = gp.sites();
            column_cross.push(DMatrix::from_fn(centers.len(), sites.len(), |r, c| {
                rbf(centers[r], sites[c], layer.delta_x, layer.delta_y)
            }));
            gps.push(gp);
        }
        Ok(World {
            layout: spec.layout(),
            spec,
            geometry,
            gps,
            column_mean,
            column_cross,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn geometry(&self) -> &VoxelGeometry {
        &self.geometry
    }

    pub fn gp(&self, layer: usize) -> &LayerGp {
        &self.gps[layer]
    }

    /// Raw (un-maximised) boundary depth per layer per column.
    pub fn column_boundaries(&self, params: &WorldParams) -> Result<Vec<Vec<f64>>> {
        params.check(&self.spec)?;
        Ok(self
            .gps
            .iter()
            .enumerate()
            .map(|(i, gp)| {
                let w = gp.weights(&params.alpha[i]);
                let offs = &self.column_cross[i] * w;
                self.column_mean[i]
                    .iter()
                    .zip(offs.iter())
                    .map(|(m, o)| m + o)
                    .collect()
            })
            .collect())
    }

    pub fn voxelise(&self, params: &WorldParams) -> Result<VoxelModel> {
        let bounds = self.column_boundaries(params)?;
        let g = self.geometry;
        let nz = g.dims[2];
        let n_layers = self.spec.layers.len();
        let mut occupancy = vec![0u16; g.n_voxels()];
        let mut tops = vec![0.0; n_layers];
        for column in 0..g.n_columns() {
            let mut running = f64::NEG_INFINITY;
            for (i, top) in tops.iter_mut().enumerate() {
                running = running.max(bounds[i][column]);
                *top = running;
            }
            // number of effective tops at or above the cell centre
            let mut count = 0usize;
            let cells = &mut occupancy[column * nz..(column + 1) * nz];
            for (iz, cell) in cells.iter_mut().enumerate() {
                let zc = g.z_center(iz);
                while count < n_layers && tops[count] <= zc {
                    count += 1;
                }
                *cell = count.saturating_sub(1) as u16;
            }
        }
        let properties = self
            .spec
            .roles()
            .into_iter()
            .map(|role| {
                let per_layer: Vec<f64> = self
                    .spec
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l.property_index(role).map_or(f64::NAN, |k| params.rho[i][k]))
                    .collect();
                let grid = occupancy.iter().map(|&o| per_layer[o as usize]).collect();
                (role, grid)
            })
            .collect();
        Ok(VoxelModel {
            geometry: g,
            occupancy,
            properties,
        })
    }

    pub fn voxelise_flat(&self, theta: &[f64]) -> Result<VoxelModel> {
        self.voxelise(&WorldParams::unpack(&self.layout, theta)?)
    }
}

pub fn voxelise(spec: &WorldSpec, params: &WorldParams) -> Result<VoxelModel> {
    World::new(spec.clone())?.voxelise(params)
}

/// Pads the model laterally by `pad_cells` on every side, copying the
/// nearest edge column into the padding.
pub fn extend_margins(model: &VoxelModel, pad_cells: usize) -> VoxelModel {
    if pad_cells == 0 {
        return model.clone();
    }
    let g = model.geometry;
    let [nx, ny, nz] = g.dims;
    let p = pad_cells;
    let geometry = g.padded(p);
    let source_column = |c: usize| {
        let ix = (c % geometry.dims[0]).saturating_sub(p).min(nx - 1);
        let iy = (c / geometry.dims[0]).saturating_sub(p).min(ny - 1);
        iy * nx + ix
    };
    let remap = |grid_nz: usize| {
        (0..geometry.n_columns())
            .flat_map(move |c| {
                let s = source_column(c);
                (s * grid_nz)..(s * grid_nz + grid_nz)
            })
            .collect::<Vec<usize>>()
    };
    let idx = remap(nz);
    VoxelModel {
        geometry,
        occupancy: idx.iter().map(|&i| model.occupancy[i]).collect(),
        properties: model
            .properties
            .iter()
            .map(|(&r, v)| (r, idx.iter().map(|&i| v[i]).collect()))
            .collect(),
    }
}
