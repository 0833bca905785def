use std::path::Path;

use anyhow::{bail, Context, Result};
use snakebench::experiment::ExperimentConfig;
use toml::{Table, Value};

/// Overlays `user` onto `base` key by key. Keys the defaults do not know are
/// rejected so that typos cannot pass silently.
fn overlay(base: &mut Table, user: Table, at: &str) -> Result<()> {
    for (key, value) in user {
        let here = if at.is_empty() { key.clone() } else { format!("{at}.{key}") };
        match (base.get_mut(&key), value) {
            (None, _) => bail!("unknown config key `{here}`"),
            (Some(Value::Table(b)), Value::Table(u)) => overlay(b, u, &here)?,
            (Some(slot), v) => *slot = v,
        }
    }
    Ok(())
}

/// Reads a TOML experiment file. Absent keys keep the experiment defaults,
/// including inside partially given sections.
pub fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let user: Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut merged = Table::try_from(ExperimentConfig::default()).context("encoding defaults")?;
    overlay(&mut merged, user, "").with_context(|| format!("in {}", path.display()))?;
    Value::Table(merged)
        .try_into()
        .with_context(|| format!("interpreting {}", path.display()))
}

/// Checks every section so bad values fail before any work starts.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.env.validate()?;
    cfg.game.validate()?;
    cfg.pretrain.learner.validate()?;
    Ok(())
}

pub fn write_resolved(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let text = toml::to_string(cfg).context("encoding resolved config")?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
