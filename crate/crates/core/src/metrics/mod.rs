//! The four reference-free underwater quality metrics.

mod ccf;
mod config;
mod entropy;
mod uciqe;
mod uiqm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ccf::{ccf, ccf_components, colorfulness, contrast, dark_channel, fog_density, CcfComponents};
pub use config::{MetricConfig, DEFAULT_CONFIG_TOML};
pub use entropy::{entropy, gray_histogram};
pub use uciqe::{uciqe, uciqe_components, UciqeComponents, SATURATION_MIN_LUMA};
pub use uiqm::{eme, sobel_edge_map, uicm, uiconm, uiqm, uiqm_components, uism, UiqmComponents};

use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

/// Identifies one of the four metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Uiqm,
    Uciqe,
    Ccf,
    Entropy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Uiqm,
        MetricKind::Uciqe,
        MetricKind::Ccf,
        MetricKind::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Uiqm => "uiqm",
            MetricKind::Uciqe => "uciqe",
            MetricKind::Ccf => "ccf",
            MetricKind::Entropy => "entropy",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown metric `{s}`")))
    }
}

/// Raw scores of one image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub uiqm: f64,
    pub uciqe: f64,
    pub ccf: f64,
    pub entropy: f64,
}

impl MetricVector {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Uiqm => self.uiqm,
            MetricKind::Uciqe => self.uciqe,
            MetricKind::Ccf => self.ccf,
            MetricKind::Entropy => self.entropy,
        }
    }

    pub fn set(&mut self, kind: MetricKind, value: f64) {
        match kind {
            MetricKind::Uiqm => self.uiqm = value,
            MetricKind::Uciqe => self.uciqe = value,
            MetricKind::Ccf => self.ccf = value,
            MetricKind::Entropy => self.entropy = value,
        }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            uiqm: v[0],
            uciqe: v[1],
            ccf: v[2],
            entropy: v[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.uiqm, self.uciqe, self.ccf, self.entropy]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Computes all four metrics. Fails with the first metric error, which names
/// the metric.
pub fn metric_vector(img: &ImageBuffer, cfg: &MetricConfig) -> Result<MetricVector> {
    let v = MetricVector {
        uiqm: uiqm(img, cfg)?,
        uciqe: uciqe(img, cfg)?,
        ccf: ccf(img, cfg)?,
        entropy: entropy(img),
    };
    if !v.is_finite() {
        return Err(Error::metric("metric_vector", format!("non-finite score {v:?}")));
    }
    Ok(v)
}
