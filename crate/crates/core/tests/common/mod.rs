//! Straightforward nested-loop reference implementations shared by the
//! integration tests. They favour obviousness over speed and share no code
//! with the library kernels.
#![allow(dead_code)]

pub mod detref;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwqa_core::qindex::MetricRow;
use uwqa_core::{ImageBuffer, MetricTable, MetricVector};

/// Core test fixture path. Resolved through the sibling directory so the
/// module also works when included from another crate's tests.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs().max(1e-3)
}

type Grid = Vec<Vec<f64>>;

fn channel_grid(img: &ImageBuffer, c: usize) -> Grid {
    (0..img.height())
        .map(|y| (0..img.width()).map(|x| img.pixel(x, y)[c] as f64).collect())
        .collect()
}

fn gray_grid(img: &ImageBuffer) -> Grid {
    let mut g = vec![vec![0.0; img.width()]; img.height()];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(x, y);
            g[y][x] = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
        }
    }
    g
}

/// Blocks of a 10x10 grid as flat value lists; remainders dropped.
fn grid_blocks(g: &Grid) -> Vec<Vec<f64>> {
    let (h, w) = (g.len(), g[0].len());
    let (bw, bh) = (w / 10, h / 10);
    let mut out = Vec::new();
    for j in 0..10 {
        for i in 0..10 {
            let mut b = Vec::new();
            for y in j * bh..(j + 1) * bh {
                for x in i * bw..(i + 1) * bw {
                    b.push(g[y][x]);
                }
            }
            out.push(b);
        }
    }
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let mut lo = v[0];
    let mut hi = v[0];
    for &x in v {
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    (lo, hi)
}

fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

fn pop_var(v: &[f64], center: f64) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += (x - center) * (x - center);
    }
    s / v.len() as f64
}

fn opponents(img: &ImageBuffer) -> (Vec<f64>, Vec<f64>) {
    let mut rg = Vec::new();
    let mut yb = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [r, g, b] = img.pixel(x, y).map(|v| v as f64);
            rg.push(r - g);
            yb.push((r + g) / 2.0 - b);
        }
    }
    (rg, yb)
}

pub fn uicm(img: &ImageBuffer) -> f64 {
    let trimmed = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let t = (0.1 * s.len() as f64).floor() as usize;
        mean(&s[t..s.len() - t])
    };
    let (rg, yb) = opponents(img);
    let (mu_rg, mu_yb) = (trimmed(&rg), trimmed(&yb));
    let spread = pop_var(&rg, mu_rg) + pop_var(&yb, mu_yb);
    -0.0268 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + 0.1586 * spread.sqrt()
}

fn eme(g: &Grid) -> f64 {
    let mut total = 0.0;
    for b in grid_blocks(g) {
        let (lo, hi) = min_max(&b);
        if lo > 0.0 {
            total += (hi / lo).ln();
        }
    }
    2.0 / 100.0 * total
}

pub fn uism(img: &ImageBuffer) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let weights = [0.299, 0.587, 0.114];
    let mut total = 0.0;
    for c in 0..3 {
        let ch = channel_grid(img, c);
        let at = |x: i64, y: i64| ch[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];
        let mut edge = vec![vec![0.0; w as usize]; h as usize];
        for y in 0..h {
            for x in 0..w {
                let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
                let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
                let (mut gx, mut gy) = (0.0, 0.0);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let v = at(x + dx, y + dy);
                        gx += kx[(dy + 1) as usize][(dx + 1) as usize] * v;
                        gy += ky[(dy + 1) as usize][(dx + 1) as usize] * v;
                    }
                }
                edge[y as usize][x as usize] = (gx * gx + gy * gy).sqrt() * at(x, y);
            }
        }
        total += weights[c] * eme(&edge);
    }
    total
}

pub fn uiconm(img: &ImageBuffer) -> f64 {
    let mut total = 0.0;
    for b in grid_blocks(&gray_grid(img)) {
        let (lo, hi) = min_max(&b);
        if hi - lo > 0.0 && hi + lo > 0.0 {
            let m = (hi - lo) / (hi + lo);
            total += m * m.ln();
        }
    }
    -total / 100.0
}

pub fn uiqm(img: &ImageBuffer) -> f64 {
    0.0282 * uicm(img) + 0.2953 * uism(img) + 3.5753 * uiconm(img)
}

/// CIELAB with the sRGB D65 matrix; white is the matrix row sums.
pub fn lab(rgb: [u8; 3]) -> [f64; 3] {
    let m = [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ];
    let mut lin = [0.0; 3];
    for i in 0..3 {
        let c = rgb[i] as f64 / 255.0;
        lin[i] = if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        };
    }
    let mut f = [0.0; 3];
    for i in 0..3 {
        let xyz = m[i][0] * lin[0] + m[i][1] * lin[1] + m[i][2] * lin[2];
        let t = xyz / (m[i][0] + m[i][1] + m[i][2]);
        let d: f64 = 6.0 / 29.0;
        f[i] = if t > d * d * d {
            t.cbrt()
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        };
    }
    let l = (116.0 * f[1] - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn uciqe(img: &ImageBuffer) -> f64 {
    let mut ls = Vec::new();
    let mut cs = Vec::new();
    let mut sats = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [l, a, b] = lab(img.pixel(x, y));
            let (l, a, b) = (l / 100.0, a / 100.0, b / 100.0);
            let c = (a * a + b * b).sqrt();
            ls.push(l);
            cs.push(c);
            if l >= 1e-6 {
                sats.push(c / l);
            }
        }
    }
    ls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let chroma_std = pop_var(&cs, mean(&cs)).sqrt();
    let contrast = quantile(&ls, 0.99) - quantile(&ls, 0.01);
    0.4680 * chroma_std + 0.2745 * contrast + 0.2576 * mean(&sats)
}

pub fn ccf(img: &ImageBuffer) -> f64 {
    let (rg, yb) = opponents(img);
    let (mu_rg, mu_yb) = (mean(&rg), mean(&yb));
    let color = (pop_var(&rg, mu_rg) + pop_var(&yb, mu_yb)).sqrt()
        + 0.3 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt();

    let blocks = grid_blocks(&gray_grid(img));
    let mut contrast = 0.0;
    for b in &blocks {
        contrast += pop_var(b, mean(b)).sqrt();
    }
    contrast /= blocks.len() as f64;

    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = 7i64;
    let mut dark_sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let mut lo = 255u8;
            for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                    let p = img.pixel(xx as usize, yy as usize);
                    lo = lo.min(p[0]).min(p[1]).min(p[2]);
                }
            }
            dark_sum += lo as f64;
        }
    }
    let fog = 100.0 * dark_sum / (255.0 * (w * h) as f64);
    0.17593 * color + 0.61759 * contrast - 0.33988 * fog
}

pub fn entropy(img: &ImageBuffer) -> f64 {
    let g = gray_grid(img);
    let mut hist = [0usize; 256];
    for row in &g {
        for v in row {
            hist[(v + 0.5).floor() as usize] += 1;
        }
    }
    let n = (img.width() * img.height()) as f64;
    let mut h = 0.0;
    for c in hist {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Random table with realistic metric ranges and occasional injected spikes.
pub fn random_table(seed: u64) -> MetricTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_models = rng.random_range(2..=6);
    let n_images = rng.random_range(3..=40);
    let mut rows = Vec::new();
    for m in 0..n_models {
        let model = if m == 0 { "original".to_string() } else { format!("m{m}") };
        let shift: f64 = rng.random_range(-1.0..1.0);
        for i in 0..n_images {
            let mut v = [
                rng.random_range(0.5..4.5) + shift,
                rng.random_range(0.3..0.7),
                rng.random_range(5.0..35.0) + 3.0 * shift,
                rng.random_range(4.0..8.0),
            ];
            if rng.random_bool(0.05) {
                let k = rng.random_range(0..4);
                v[k] *= if rng.random_bool(0.5) { 25.0 } else { -25.0 };
            }
            rows.push(MetricRow {
                model: model.clone(),
                image_id: format!("img{i:03}"),
                metrics: MetricVector::from_array(v),
            });
        }
    }
    MetricTable::from_rows(rows).unwrap()
}
