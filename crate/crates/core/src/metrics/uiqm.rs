//! UIQM: colorfulness (UICM), sharpness (UISM) and contrast (UIConM).

use serde::{Deserialize, Serialize};

use super::MetricConfig;
use crate::error::{Error, Result};
use crate::raster::{partition_blocks, to_grayscale, ImageBuffer, Plane, LUMA_WEIGHTS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UiqmComponents {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
}

impl UiqmComponents {
    pub fn combine(&self, cfg: &MetricConfig) -> f64 {
        let [c1, c2, c3] = cfg.uiqm_weights;
        c1 * self.uicm + c2 * self.uism + c3 * self.uiconm
    }
}

pub fn uiqm(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    Ok(uiqm_components(img, cfg)?.combine(cfg))
}

pub fn uiqm_components(img: &ImageBuffer, cfg: &MetricConfig) -> Result<UiqmComponents> {
    check_grid(img, cfg, "uiqm")?;
    Ok(UiqmComponents {
        uicm: uicm(img, cfg),
        uism: uism(img, cfg)?,
        uiconm: uiconm(img, cfg)?,
    })
}

pub(crate) fn check_grid(img: &ImageBuffer, cfg: &MetricConfig, metric: &'static str) -> Result<()> {
    if img.width() < cfg.blocks_k1 || img.height() < cfg.blocks_k2 {
        return Err(Error::metric(
            metric,
            format!(
                "{}x{} image is smaller than the {}x{} block grid",
                img.width(),
                img.height(),
                cfg.blocks_k1,
                cfg.blocks_k2
            ),
        ));
    }
    Ok(())
}

/// Histogram of integer-coded samples; bin `i` holds the value `(i - offset) / scale`.
struct CodedHistogram {
    counts: Vec<u64>,
    offset: i64,
    scale: f64,
    total: u64,
}

impl CodedHistogram {
    fn new(offset: i64, scale: f64) -> Self {
        Self {
            counts: vec![0; (2 * offset + 1) as usize],
            offset,
            scale,
            total: 0,
        }
    }

    #[inline]
    fn push(&mut self, code: i64) {
        self.counts[(code + self.offset) as usize] += 1;
        self.total += 1;
    }

    fn value(&self, bin: usize) -> f64 {
        (bin as i64 - self.offset) as f64 / self.scale
    }

    /// Mean of the order statistics with ranks in `[trim, total - trim)`.
    fn trimmed_mean(&self, alpha: f64) -> f64 {
        let trim = (alpha * self.total as f64).floor() as u64;
        let (lo, hi) = (trim, self.total - trim);
        let mut rank = 0u64;
        let mut sum = 0.0;
        for (bin, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let start = rank.max(lo);
            let end = (rank + c).min(hi);
            if end > start {
                sum += (end - start) as f64 * self.value(bin);
            }
            rank += c;
        }
        sum / (hi - lo) as f64
    }

    /// Mean squared deviation of all samples around `center`.
    fn spread(&self, center: f64) -> f64 {
        let sum: f64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(bin, &c)| {
                let d = self.value(bin) - center;
                c as f64 * d * d
            })
            .sum();
        sum / self.total as f64
    }
}

/// Colorfulness from alpha-trimmed statistics of the opponent channels
/// RG = R - G and YB = (R + G) / 2 - B.
pub fn uicm(img: &ImageBuffer, cfg: &MetricConfig) -> f64 {
    // RG is integral in [-255, 255]; 2 * YB is integral in [-510, 510].
    let mut rg = CodedHistogram::new(255, 1.0);
    let mut yb = CodedHistogram::new(510, 2.0);
    for &[r, g, b] in img.pixels() {
        let (r, g, b) = (i64::from(r), i64::from(g), i64::from(b));
        rg.push(r - g);
        yb.push(r + g - 2 * b);
    }
    let mu_rg = rg.trimmed_mean(cfg.alpha_trim);
    let mu_yb = yb.trimmed_mean(cfg.alpha_trim);
    let var_rg = rg.spread(mu_rg);
    let var_yb = yb.spread(mu_yb);
    let [k_mean, k_var] = cfg.uicm_coefficients;
    k_mean * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + k_var * (var_rg + var_yb).sqrt()
}

/// Sobel gradient magnitude of one channel (replicated borders) multiplied by
/// the channel itself.
pub fn sobel_edge_map(img: &ImageBuffer, channel: usize) -> Plane {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let at = |x: usize, y: usize| i32::from(px[y * w + x][channel]);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let gx = (at(xp, ym) + 2 * at(xp, y) + at(xp, yp))
                - (at(xm, ym) + 2 * at(xm, y) + at(xm, yp));
            let gy = (at(xm, yp) + 2 * at(x, yp) + at(xp, yp))
                - (at(xm, ym) + 2 * at(x, ym) + at(xp, ym));
            let mag = f64::from(gx * gx + gy * gy).sqrt();
            out.push(mag * f64::from(at(x, y)));
        }
    }
    Plane::from_parts(w, h, out)
}

/// Block-wise EME: `2 / (k1 k2) * sum(ln(max / min))`, blocks with a zero
/// minimum contribute 0.
pub fn eme(plane: &Plane, k1: usize, k2: usize) -> Result<f64> {
    let blocks = partition_blocks(plane, k1, k2)?;
    let sum: f64 = blocks
        .iter()
        .map(|b| {
            let (lo, hi) = b.extrema();
            if lo > 0.0 {
                (hi / lo).ln()
            } else {
                0.0
            }
        })
        .sum();
    Ok(2.0 / (k1 * k2) as f64 * sum)
}

/// Sharpness: luma-weighted EME of the three Sobel edge maps.
pub fn uism(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    let mut total = 0.0;
    for (c, weight) in LUMA_WEIGHTS.iter().enumerate() {
        total += weight * eme(&sobel_edge_map(img, c), cfg.blocks_k1, cfg.blocks_k2)?;
    }
    Ok(total)
}

/// Simplified logAMEE on the grayscale plane:
/// `-1 / (k1 k2) * sum(M ln M)` with Michelson contrast `M` per block.
pub fn uiconm(img: &ImageBuffer, cfg: &MetricConfig) -> Result<f64> {
    let gray = to_grayscale(img);
    let blocks = partition_blocks(&gray, cfg.blocks_k1, cfg.blocks_k2)?;
    let sum: f64 = blocks
        .iter()
        .map(|b| {
            let (lo, hi) = b.extrema();
            let top = hi - lo;
            let bot = hi + lo;
            if top == 0.0 || bot == 0.0 {
                0.0
            } else {
                let m = top / bot;
                m * m.ln()
            }
        })
        .sum();
    Ok(-sum / (cfg.blocks_k1 * cfg.blocks_k2) as f64)
}
