use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PolicyParameters;
use crate::error::PolicyError;

pub const CHECKPOINT_FORMAT: &str = "snakebench-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Hex SHA-256 of the canonical JSON encoding of `config`.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    let mut out = String::with_capacity(64);
    for b in Sha256::digest(&bytes) {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
    pub params: PolicyParameters,
}

impl Checkpoint {
    pub fn new(params: PolicyParameters, config_digest: String) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_digest,
            params,
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), PolicyError> {
    let text = serde_json::to_string(checkpoint).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| PolicyError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Reads a checkpoint and checks it with [`Checkpoint::validate`].
pub fn load_checkpoint(path: &Path, expected_digest: Option<&str>) -> Result<Checkpoint, PolicyError> {
    let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
    ck.validate(expected_digest)?;
    Ok(ck)
}

impl Checkpoint {
    /// Rejects foreign formats, newer versions, inconsistent parameter
    /// counts and, when `expected_digest` is given, a mismatched config.
    pub fn validate(&self, expected_digest: Option<&str>) -> Result<(), PolicyError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(PolicyError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version > CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if let Some(d) = expected_digest {
            if d != self.config_digest {
                return Err(PolicyError::Checkpoint(format!(
                    "config digest {} does not match {}",
                    self.config_digest, d
                )));
            }
        }
        if self.params.theta.len() != self.params.shape.n_params() {
            return Err(PolicyError::Checkpoint("parameter count does not match shape".into()));
        }
        self.params.shape.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{LearnerConfig, PolicyShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParameters::init(PolicyShape::regulator(26, 4, 6), -0.7, &mut rng).unwrap();
        let digest = config_digest(&LearnerConfig::default());
        assert_eq!(digest.len(), 64);
        let dir = std::env::temp_dir().join(format!("snakebench-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r2.json");
        save_checkpoint(&path, &Checkpoint::new(p.clone(), digest.clone())).unwrap();
        let back = load_checkpoint(&path, Some(&digest)).unwrap();
        assert_eq!(back.params.to_bytes(), p.to_bytes());
        assert!(load_checkpoint(&path, Some("beef")).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
