//! Discrete Shannon entropy of the 8-bit grayscale histogram.

use crate::raster::{to_grayscale, ImageBuffer};

/// 256-bin histogram of the rounded BT.601 luma.
pub fn gray_histogram(img: &ImageBuffer) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for v in to_grayscale(img).values() {
        hist[v.round().clamp(0.0, 255.0) as usize] += 1;
    }
    hist
}

/// `-sum(p log2 p)` in bits; always in [0, 8].
pub fn entropy(img: &ImageBuffer) -> f64 {
    let hist = gray_histogram(img);
    let n = img.pixels().len() as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // A single occupied bin gives -1 * log2(1) = -0.0.
    h.max(0.0)
}
