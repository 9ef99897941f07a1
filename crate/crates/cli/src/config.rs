use std::path::Path;

use serde::{Deserialize, Serialize};
use uwqa_core::deteval::AuditConfig;
use uwqa_core::MetricConfig;

/// Contents of the `--config` TOML file. Every section is optional.
///
/// ```toml
/// seed = 7
/// jobs = 4
///
/// [metrics]
/// alpha_trim = 0.1
///
/// [audit]
/// conf_min = 0.5
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub metrics: MetricConfig,
    pub audit: AuditConfig,
}

impl CliConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: CliConfig = toml::from_str(text)?;
        cfg.metrics.validate()?;
        cfg.audit.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }

    /// Loads `path` if given, otherwise the built-in defaults.
    pub fn resolve(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}
