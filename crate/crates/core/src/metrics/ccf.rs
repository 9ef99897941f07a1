//! CCF: linear combination of colorfulness, contrast and fog-density indices.
//!
//! * colorfulness: `sqrt(var_rg + var_yb) + m * sqrt(mu_rg^2 + mu_yb^2)` over
//!   the opponent channels RG = R - G, YB = (R + G) / 2 - B, where `m` is
//!   `ccf_colorfulness_mean_weight`.
//! * contrast: mean over the block grid of the RMS contrast (population
//!   standard deviation) of the grayscale plane.
//! * fog density: mean dark channel (per-pixel channel minimum followed by a
//!   square minimum filter of radius `ccf_dark_channel_radius`), as a
//!   percentage of full scale. Hazier images score higher.

use serde::{Deserialize, Serialize};

use super::uiqm::check_grid;
use super::MetricConfig;
use crate::error::Result;
use crate::raster::{partition_blocks, to_grayscale, ImageBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcfComponents {
    pub colorfulness: f64,
    pub contrast: f64,
    pub fog_density: f64,
}

impl CcfComponents {
    pub fn combine(&self, cfg: &MetricConfig) -> f64 {
        let [v1, v2, v3] = cfg.ccf_weights;
        v1 * self.colorfulness + v2 * self.contrast + v3 * self.fog_density
    }
}

pub fn ccf(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    Ok(ccf_components(img, cfg)?.combine(cfg))
}

pub fn ccf_components(img: &ImageBuffer, cfg: &MetricConfig) -> Result<CcfComponents> {
    check_grid(img, cfg, "ccf")?;
    Ok(CcfComponents {
        colorfulness: colorfulness(img, cfg),
        contrast: contrast(img, cfg)?,
        fog_density: fog_density(img, cfg),
    })
}

pub fn colorfulness(img: &ImageBuffer, cfg: &MetricConfig) -> f64 {
    // Integer accumulation of RG and 2*YB keeps the means exact.
    let n = img.pixels().len() as f64;
    let (mut s_rg, mut s_yb2) = (0i64, 0i64);
    for &[r, g, b] in img.pixels() {
        let (r, g, b) = (i64::from(r), i64::from(g), i64::from(b));
        s_rg += r - g;
        s_yb2 += r + g - 2 * b;
    }
    let mu_rg = s_rg as f64 / n;
    let mu_yb = s_yb2 as f64 / (2.0 * n);
    let (mut v_rg, mut v_yb) = (0.0, 0.0);
    for &[r, g, b] in img.pixels() {
        let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
        let d_rg = r - g - mu_rg;
        let d_yb = 0.5 * (r + g) - b - mu_yb;
        v_rg += d_rg * d_rg;
        v_yb += d_yb * d_yb;
    }
    ((v_rg + v_yb) / n).sqrt()
        + cfg.ccf_colorfulness_mean_weight * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt()
}

pub fn contrast(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    let gray = to_grayscale(img);
    let blocks = partition_blocks(&gray, cfg.blocks_k1, cfg.blocks_k2)?;
    let sum: f64 = blocks
        .iter()
        .map(|b| {
            let n = b.len() as f64;
            let mean = b.values().sum::<f64>() / n;
            (b.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        })
        .sum();
    Ok(sum / blocks.len() as f64)
}

/// Dark channel via a separable min filter (row pass, then column pass).
pub fn dark_channel(img: &ImageBuffer, radius: usize) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mins: Vec<u8> = img
        .pixels()
        .iter()
        .map(|p| p[0].min(p[1]).min(p[2]))
        .collect();
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        let line = &mins[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = *line[lo..=hi].iter().min().expect("non-empty window");
        }
    }
    let mut out = vec![0u8; w * h];
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(h - 1);
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).min().expect("non-empty");
        }
    }
    out
}

pub fn fog_density(img: &ImageBuffer, cfg: &MetricConfig) -> f64 {
    let dark = dark_channel(img, cfg.ccf_dark_channel_radius);
    let sum: u64 = dark.iter().map(|&v| u64::from(v)).sum();
    100.0 * sum as f64 / (255.0 * dark.len() as f64)
}
