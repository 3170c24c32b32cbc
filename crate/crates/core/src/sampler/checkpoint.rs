//! Versioned binary checkpoints with an integrity checksum.
//!
//! Layout: 8-byte magic, little-endian `u32` version, bincode payload,
//! SHA-256 of everything before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunState;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LAYERMC\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Hash of the configuration and data the run was started with.
    pub config_hash: String,
    pub state: RunState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = bincode::serialize(self).map_err(|e| Error::Checkpoint(format!("encode: {e}")))?;
        let mut out = Vec::with_capacity(payload.len() + 44);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&payload);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch; file is corrupt".into()));
        }
        bincode::deserialize(&body[12..]).map_err(|e| Error::Checkpoint(format!("decode: {e}")))
    }

    /// Writes via a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Loads and refuses checkpoints made for another configuration.
    pub fn load_matching(path: &Path, config_hash: &str) -> Result<Self> {
        let c = Self::load(path)?;
        if c.config_hash != config_hash {
            return Err(Error::Checkpoint(format!(
                "configuration hash {} does not match checkpoint hash {}",
                config_hash, c.config_hash
            )));
        }
        Ok(c)
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
        fn log_likelihood(&self, theta: &[f64]) -> f64 {
            -theta[0].powi(2)
        }
    }

    fn checkpoint() -> Checkpoint {
        let t = Flat(GaussianPrior::independent(&[0.0, 1.0], &[1.0, 1.0]).unwrap());
        let cfg = SamplerConfig {
            iterations: 200,
            n_stacks: 2,
            n_temps: 3,
            ..SamplerConfig::default()
        };
        Checkpoint {
            config_hash: "abc".into(),
            state: Sampler::new(&t, cfg).unwrap().run().unwrap(),
        }
    }

    #[test]
    fn round_trip() {
        let c = checkpoint();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap(), c);
    }

    #[test]
    fn detects_corruption() {
        let mut b = checkpoint().to_bytes().unwrap();
        let mid = b.len() / 2;
        b[mid] ^= 1;
        assert_eq!(Checkpoint::from_bytes(&b).unwrap_err().kind(), "checkpoint");
        assert!(Checkpoint::from_bytes(b"garbage").is_err());
    }

    #[test]
    fn refuses_other_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        checkpoint().save(&p).unwrap();
        assert!(Checkpoint::load_matching(&p, "abc").is_ok());
        assert!(Checkpoint::load_matching(&p, "xyz").is_err());
    }
}
