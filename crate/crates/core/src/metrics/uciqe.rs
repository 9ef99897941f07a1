//! UCIQE: chroma spread, luminance contrast and mean saturation in CIELAB.

use serde::{Deserialize, Serialize};

use super::MetricConfig;
use crate::error::{Error, Result};
use crate::raster::{rgb_to_lab, ImageBuffer};

/// Pixels darker than this (on the normalized L scale) are excluded from the
/// saturation mean.
pub const SATURATION_MIN_LUMA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UciqeComponents {
    pub chroma_std: f64,
    pub luminance_contrast: f64,
    pub mean_saturation: f64,
}

impl UciqeComponents {
    pub fn combine(&self, cfg: &MetricConfig) -> f64 {
        let [w1, w2, w3] = cfg.uciqe_weights;
        w1 * self.chroma_std + w2 * self.luminance_contrast + w3 * self.mean_saturation
    }
}

pub fn uciqe(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    Ok(uciqe_components(img, cfg)?.combine(cfg))
}

/// L, a and b are scaled by 1/100 before the statistics, so L lies in [0, 1].
pub fn uciqe_components(img: &ImageBuffer, cfg: &MetricConfig) -> Result<UciqeComponents> {
    let lab = rgb_to_lab(img);
    let n = lab.values.len();
    let mut luma = Vec::with_capacity(n);
    let (mut c_sum, mut s_sum, mut s_count) = (0.0, 0.0, 0usize);
    let mut chroma = Vec::with_capacity(n);
    for &[l, a, b] in &lab.values {
        let (l, a, b) = (l / 100.0, a / 100.0, b / 100.0);
        let c = (a * a + b * b).sqrt();
        c_sum += c;
        chroma.push(c);
        luma.push(l);
        if l >= SATURATION_MIN_LUMA {
            s_sum += c / l;
            s_count += 1;
        }
    }
    if s_count == 0 {
        return Err(Error::metric(
            "uciqe",
            "saturation is undefined: every pixel is black",
        ));
    }
    let c_mean = c_sum / n as f64;
    let chroma_std = (chroma.iter().map(|c| (c - c_mean) * (c - c_mean)).sum::<f64>()
        / n as f64)
        .sqrt();
    let q = cfg.luminance_percentile;
    let luminance_contrast = select_quantile(&mut luma, 1.0 - q) - select_quantile(&mut luma, q);
    Ok(UciqeComponents {
        chroma_std,
        luminance_contrast,
        mean_saturation: s_sum / s_count as f64,
    })
}

/// Linearly interpolated quantile (position `q * (n - 1)`) using selection
/// instead of a full sort. Reorders `values`.
fn select_quantile(values: &mut [f64], q: f64) -> f64 {
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut v_lo, rest) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return v_lo;
    }
    let v_hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
    v_lo + (v_hi - v_lo) * frac
}
