use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Text of the embedded default configuration file.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("default_metrics.toml");

/// Constants and tunables for the four metrics.
///
/// Loaded from a TOML key/value file; missing keys fall back to the embedded
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub alpha_trim: f64,
    pub blocks_k1: usize,
    pub blocks_k2: usize,
    pub uiqm_weights: [f64; 3],
    pub uicm_coefficients: [f64; 2],
    pub uciqe_weights: [f64; 3],
    pub luminance_percentile: f64,
    pub ccf_weights: [f64; 3],
    pub ccf_colorfulness_mean_weight: f64,
    pub ccf_dark_channel_radius: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            alpha_trim: 0.1,
            blocks_k1: 10,
            blocks_k2: 10,
            uiqm_weights: [0.0282, 0.2953, 3.5753],
            uicm_coefficients: [-0.0268, 0.1586],
            uciqe_weights: [0.4680, 0.2745, 0.2576],
            luminance_percentile: 0.01,
            ccf_weights: [0.17593, 0.61759, -0.33988],
            ccf_colorfulness_mean_weight: 0.3,
            ccf_dark_channel_radius: 7,
        }
    }
}

impl MetricConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: MetricConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.4).contains(&self.alpha_trim) {
            return Err(Error::Config(format!(
                "alpha_trim must be in [0, 0.4], got {}",
                self.alpha_trim
            )));
        }
        if self.blocks_k1 == 0 || self.blocks_k2 == 0 {
            return Err(Error::Config("block counts must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.luminance_percentile) {
            return Err(Error::Config(format!(
                "luminance_percentile must be in [0, 0.5), got {}",
                self.luminance_percentile
            )));
        }
        let weights = self
            .uiqm_weights
            .iter()
            .chain(&self.uicm_coefficients)
            .chain(&self.uciqe_weights)
            .chain(&self.ccf_weights)
            .chain(std::iter::once(&self.ccf_colorfulness_mean_weight));
        if weights.into_iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("all weights must be finite".into()));
        }
        Ok(())
    }
}
