//! Per-voxel layer probabilities, information entropy and depth slices.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{VoxelGeometry, World};

/// `-sum p log2 p`, ignoring zero probabilities.
pub fn entropy_bits(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
    h.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    pub geometry: VoxelGeometry,
    pub n_layers: usize,
    pub n_samples: usize,
    /// `n_voxels x n_layers`, voxel-major.
    pub probabilities: Vec<f64>,
    /// Entropy over all layers, bits.
    pub entropy: Vec<f64>,
    pub target_layer: Option<usize>,
    /// Probability of the target layer per voxel.
    pub target_probability: Option<Vec<f64>>,
    /// Binary (target / not target) entropy per voxel, bits.
    pub target_entropy: Option<Vec<f64>>,
    pub below_depth: f64,
    /// Mean layer entropy over voxels centred at or below `below_depth`.
    pub mean_entropy_below: f64,
    pub mean_target_entropy_below: Option<f64>,
}

impl EntropyMap {
    pub fn layer_probabilities(&self, voxel: usize) -> &[f64] {
        &self.probabilities[voxel * self.n_layers..(voxel + 1) * self.n_layers]
    }
}

/// Voxelises every sample and tallies layer membership per voxel.
pub fn voxel_posterior(
    world: &World,
    samples: &[&[f64]],
    target_layer: Option<usize>,
    below_depth: f64,
) -> Result<EntropyMap> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to voxelise".into()));
    }
    let n_layers = world.spec().layers.len();
    if let Some(t) = target_layer {
        if t >= n_layers {
            return Err(Error::InvalidInput(format!(
                "target layer {t} out of range (world has {n_layers} layers)"
            )));
        }
    }
    let g = *world.geometry();
    let nv = g.n_voxels();
    let counts = samples
        .par_iter()
        .map(|theta| {
            let m = world.voxelise_flat(theta)?;
            let mut c = vec![0u32; nv * n_layers];
            for (v, &o) in m.occupancy.iter().enumerate() {
                c[v * n_layers + o as usize] += 1;
            }
            Ok::<_, Error>(c)
        })
        .try_reduce(
            || vec![0u32; nv * n_layers],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let n = samples.len() as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let entropy: Vec<f64> = probabilities.chunks(n_layers).map(entropy_bits).collect();
    let target_probability: Option<Vec<f64>> =
        target_layer.map(|t| (0..nv).map(|v| probabilities[v * n_layers + t]).collect());
    let target_entropy: Option<Vec<f64>> = target_probability
        .as_ref()
        .map(|p| p.iter().map(|&q| entropy_bits(&[q, 1.0 - q])).collect());
    let below: Vec<usize> = (0..nv)
        .filter(|v| g.z_center(v % g.dims[2]) >= below_depth)
        .collect();
    if below.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no voxels lie below depth {below_depth} m"
        )));
    }
    let mean_over = |h: &[f64]| below.iter().map(|&v| h[v]).sum::<f64>() / below.len() as f64;
    Ok(EntropyMap {
        geometry: g,
        n_layers,
        n_samples: samples.len(),
        mean_entropy_below: mean_over(&entropy),
        mean_target_entropy_below: target_entropy.as_deref().map(mean_over),
        probabilities,
        entropy,
        target_layer,
        target_probability,
        target_entropy,
        below_depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub x_m: f64,
    pub y_m: f64,
    pub value: f64,
}

/// Values of `grid` on the depth slice nearest `depth`.
pub fn slice_export(geometry: &VoxelGeometry, grid: &[f64], depth: f64) -> Result<Vec<SliceRow>> {
    if grid.len() != geometry.n_voxels() {
        return Err(Error::InvalidInput("grid does not match the voxel geometry".into()));
    }
    let iz = geometry.z_index_at(depth).ok_or_else(|| {
        Error::InvalidInput(format!("depth {depth} m lies outside the voxel volume"))
    })?;
    let nz = geometry.dims[2];
    Ok((0..geometry.n_columns())
        .map(|c| {
            let [x, y] = geometry.column_center(c);
            SliceRow {
                x_m: x,
                y_m: y,
                value: grid[c * nz + iz],
            }
        })
        .collect())
}

pub fn write_slice_csv(path: &Path, rows: &[SliceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_slice_csv(path: &Path) -> Result<Vec<SliceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<SliceRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Bounds, GridSpec, LayerSpec, MeanDepth, PropertyRole, WorldSpec};

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_bits(&[1.0, 0.0]), 0.0);
        assert!((entropy_bits(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!((entropy_bits(&[0.25, 0.75]) - 0.811_278).abs() < 1e-6);
        assert!((entropy_bits(&[0.25; 4]) - 2.0).abs() < 1e-15);
    }

    fn world() -> World {
        let grid = GridSpec::new(1, 1, [0.0, 100.0], [0.0, 100.0]).unwrap();
        World::new(WorldSpec {
            layers: vec![
                LayerSpec::new("top", grid.clone(), MeanDepth::Constant(0.0), vec![PropertyRole::Density]),
                LayerSpec::new("base", grid, MeanDepth::Constant(50.0), vec![PropertyRole::Density]),
            ],
            bounds: Bounds {
                x: [0.0, 100.0],
                y: [0.0, 100.0],
                z: [0.0, 100.0],
            },
            voxel_res: [2, 2, 10],
            margin: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn identical_samples_have_zero_entropy() {
        let w = world();
        let s = [0.0, 0.0, 2.0, 3.0];
        let e = voxel_posterior(&w, &[&s, &s, &s], Some(1), 0.0).unwrap();
        assert!(e.entropy.iter().all(|&h| h == 0.0));
        assert_eq!(e.mean_entropy_below, 0.0);
    }

    #[test]
    fn split_samples_give_one_bit() {
        let w = world();
        // boundary at 30 m or 70 m: voxels between are uncertain
        let a = [0.0, -20.0, 2.0, 3.0];
        let b = [0.0, 20.0, 2.0, 3.0];
        let e = voxel_posterior(&w, &[&a, &b], Some(1), 0.0).unwrap();
        let g = e.geometry;
        for v in 0..g.n_voxels() {
            let z = g.z_center(v % g.dims[2]);
            let expect = if (30.0..70.0).contains(&z) { 1.0 } else { 0.0 };
            assert_eq!(e.entropy[v], expect, "z {z}");
            assert_eq!(e.target_entropy.as_ref().unwrap()[v], expect);
            assert!(e.entropy[v] <= (e.n_layers as f64).log2());
        }
        assert!((e.mean_entropy_below - 0.4).abs() < 1e-12);
        assert!(voxel_posterior(&w, &[&a], Some(2), 0.0).is_err());
        assert!(voxel_posterior(&w, &[&a], None, 500.0).is_err());
    }

    #[test]
    fn slice_index_and_round_trip() {
        let g = VoxelGeometry {
            origin: [0.0, 0.0, 0.0],
            cell: [1000.0, 1000.0, 100.0],
            dims: [3, 2, 120],
        };
        assert_eq!(g.z_index_at(3500.0), Some(35));
        let grid: Vec<f64> = (0..g.n_voxels()).map(|i| (i as f64).sqrt() / 7.0).collect();
        let rows = slice_export(&g, &grid, 3500.0).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].value, grid[120 + 35]);
        let ones = slice_export(&g, &vec![1.0; g.n_voxels()], 10.0).unwrap();
        assert!(ones.iter().all(|r| r.value == 1.0));
        assert!(slice_export(&g, &grid, 12_500.0).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_slice_csv(&p, &rows).unwrap();
        assert_eq!(read_slice_csv(&p).unwrap(), rows);
    }
}
