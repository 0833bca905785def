use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use snakebench::experiment::Contender;
use snakebench::game::{Actuation, JointPolicy};
use snakebench::policy::{Checkpoint, Player};

pub const BUNDLE_FORMAT: &str = "snakebench-bundle";

/// Both players' checkpoints plus how they are composed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub format: String,
    pub name: String,
    pub actuation: Actuation,
    pub w1: f64,
    pub w2: f64,
    pub options: Vec<f64>,
    pub controller: Checkpoint,
    pub regulator: Checkpoint,
}

impl PolicyBundle {
    pub fn new(name: &str, joint: &JointPolicy, actuation: Actuation, weights: (f64, f64), options: &[f64], digest: &str) -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            name: name.into(),
            actuation,
            w1: weights.0,
            w2: weights.1,
            options: options.to_vec(),
            controller: Checkpoint::new(joint.controller.clone(), digest.into()),
            regulator: Checkpoint::new(joint.regulator.clone(), digest.into()),
        }
    }

    pub fn joint(&self) -> JointPolicy {
        JointPolicy {
            controller: self.controller.params.clone(),
            regulator: self.regulator.params.clone(),
            flag: Player::Regulator,
        }
    }

    pub fn contender(&self) -> Contender {
        Contender {
            name: self.name.clone(),
            joint: self.joint(),
            w1: self.w1,
            w2: self.w2,
            actuation: self.actuation,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let b: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if b.format != BUNDLE_FORMAT {
            bail!("{}: not a policy bundle", path.display());
        }
        b.controller.validate(None)?;
        b.regulator.validate(None)?;
        if b.controller.params.player() != Player::Controller || b.regulator.params.player() != Player::Regulator {
            bail!("{}: players are swapped", path.display());
        }
        Ok(b)
    }
}
