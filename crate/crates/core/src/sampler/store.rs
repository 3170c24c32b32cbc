//! Sample stores: one flat little-endian `f64` matrix per stack plus a JSON
//! sidecar naming the columns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunState, EXTRA_COLUMNS};
use crate::error::{Error, Result};

pub const STORE_FORMAT_VERSION: u32 = 1;
pub const SIDECAR: &str = "samples.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u32,
    pub dtype: String,
    pub layout: String,
    /// The first `n_params` columns are world parameters.
    pub n_params: usize,
    pub columns: Vec<Column>,
    pub files: Vec<String>,
    pub n_rows: Vec<usize>,
    /// Iterations between recorded rows.
    pub thinning: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub sidecar: Sidecar,
    /// Per stack, row-major.
    pub data: Vec<Vec<f64>>,
}

fn stack_file(i: usize) -> String {
    format!("stack_{i}.bin")
}

impl SampleStore {
    /// Builds a store from the recorded rows of a run. `params` names and
    /// units the parameter columns.
    pub fn from_state(state: &RunState, params: &[(String, String)]) -> Result<Self> {
        if params.len() != state.dim {
            return Err(Error::InvalidInput(format!(
                "{} column names for {} parameters",
                params.len(),
                state.dim
            )));
        }
        let mut columns: Vec<Column> = params
            .iter()
            .map(|(n, u)| Column {
                name: n.clone(),
                unit: u.clone(),
            })
            .collect();
        columns.extend(EXTRA_COLUMNS.iter().map(|n| Column {
            name: (*n).into(),
            unit: "nat".into(),
        }));
        let n = state.stacks.len();
        Ok(SampleStore {
            sidecar: Sidecar {
                format_version: STORE_FORMAT_VERSION,
                dtype: "f64le".into(),
                layout: "row-major".into(),
                n_params: state.dim,
                columns,
                files: (0..n).map(stack_file).collect(),
                n_rows: (0..n).map(|i| state.n_rows(i)).collect(),
                thinning: state.config.thinning,
                iterations: state.iteration,
            },
            data: state.stacks.iter().map(|s| s.samples.clone()).collect(),
        })
    }

    pub fn n_stacks(&self) -> usize {
        self.data.len()
    }

    pub fn n_cols(&self) -> usize {
        self.sidecar.columns.len()
    }

    pub fn n_params(&self) -> usize {
        self.sidecar.n_params
    }

    pub fn n_rows(&self, stack: usize) -> usize {
        self.data[stack].len() / self.n_cols()
    }

    pub fn row(&self, stack: usize, row: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[stack][row * w..(row + 1) * w]
    }

    /// World parameters of one recorded row.
    pub fn params(&self, stack: usize, row: usize) -> &[f64] {
        &self.row(stack, row)[..self.n_params()]
    }

    pub fn column(&self, stack: usize, col: usize) -> Vec<f64> {
        let w = self.n_cols();
        self.data[stack].iter().skip(col).step_by(w).copied().collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, rows) in self.sidecar.files.iter().zip(&self.data) {
            let bytes: Vec<u8> = rows.iter().flat_map(|v| v.to_le_bytes()).collect();
            let p = dir.join(file);
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        let p = dir.join(SIDECAR);
        let json = serde_json::to_string_pretty(&self.sidecar)?;
        fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let p: PathBuf = dir.join(SIDECAR);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.format_version != STORE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported sample store version {}",
                sidecar.format_version
            )));
        }
        if sidecar.dtype != "f64le" || sidecar.layout != "row-major" {
            return Err(Error::InvalidInput("unsupported sample store encoding".into()));
        }
        let w = sidecar.columns.len();
        let mut data = Vec::with_capacity(sidecar.files.len());
        for (file, &rows) in sidecar.files.iter().zip(&sidecar.n_rows) {
            let p = dir.join(file);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if bytes.len() != rows * w * 8 {
                return Err(Error::InvalidInput(format!(
                    "{}: expected {} rows of {} values",
                    p.display(),
                    rows,
                    w
                )));
            }
            data.push(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        Ok(SampleStore { sidecar, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Target;
    use crate::prior::GaussianPrior;
    use crate::sampler::{Sampler, SamplerConfig};

    struct Flat(GaussianPrior);

    impl Target for Flat {
        fn prior(&self) -> &GaussianPrior {
            &self.0
        }
        fn log_likelihood(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn write_read_round_trip() {
        let t = Flat(GaussianPrior::independent(&[0.0, 5.0], &[1.0, 1.0]).unwrap());
        let cfg = SamplerConfig {
            iterations: 300,
            n_stacks: 2,
            n_temps: 2,
            ..SamplerConfig::default()
        };
        let st = Sampler::new(&t, cfg).unwrap().run().unwrap();
        let names = vec![("a".to_string(), "m".to_string()), ("b".to_string(), "g/cc".to_string())];
        let store = SampleStore::from_state(&st, &names).unwrap();
        assert_eq!(store.n_rows(1), 30);
        assert_eq!(store.params(0, 3).len(), 2);
        let dir = tempfile::tempdir().unwrap();
        store.write(dir.path()).unwrap();
        let back = SampleStore::read(dir.path()).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.column(0, 1)[3], store.params(0, 3)[1]);
        assert!(SampleStore::from_state(&st, &names[..1]).is_err());
    }
}
