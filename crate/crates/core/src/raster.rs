//! Image decoding, color conversions and block partitioning shared by the
//! metric kernels.
//!
//! All metric arithmetic is done in `f64`; 8-bit channel values are promoted
//! on read.

use crate::error::{Error, Result};

/// BT.601 luma weights, shared by grayscale conversion and UISM.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

// sRGB primaries -> CIE XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// Decoded 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image with every pixel set to `rgb`.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// One color channel (0 = R, 1 = G, 2 = B) as a plane.
    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|p| f64::from(p[c])).collect(),
        }
    }

    pub fn mirrored_horizontally(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.pixel(self.width - 1 - x, y)
        })
        .expect("dimensions preserved")
    }

    pub fn mirrored_vertically(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.pixel(x, self.height - 1 - y)
        })
        .expect("dimensions preserved")
    }

    /// Encodes the buffer as PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let rgb = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
        let mut out = std::io::Cursor::new(Vec::new());
        rgb.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| Error::InvalidImage(e.to_string()))?;
        Ok(out.into_inner())
    }
}

/// Decodes a PNG or JPEG stream into an 8-bit RGB buffer.
///
/// 16-bit sources are truncated to their high byte and alpha is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::Decode(format!("unsupported format {format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        image::DynamicImage::ImageRgb16(_)
        | image::DynamicImage::ImageRgba16(_)
        | image::DynamicImage::ImageLuma16(_)
        | image::DynamicImage::ImageLumaA16(_) => decoded
            .to_rgb16()
            .pixels()
            .map(|p| [(p[0] >> 8) as u8, (p[1] >> 8) as u8, (p[2] >> 8) as u8])
            .collect(),
        other => other.to_rgb8().pixels().map(|p| p.0).collect(),
    };
    ImageBuffer::new(width, height, pixels)
}

/// Real-valued scalar field, one value per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} plane",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("plane contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }
}

/// Per-pixel luma with BT.601 weights.
pub fn to_grayscale(img: &ImageBuffer) -> Plane {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let values = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| wr * f64::from(r) + wg * f64::from(g) + wb * f64::from(b))
        .collect();
    Plane::from_parts(img.width(), img.height(), values)
}

/// CIELAB raster; `L` in [0, 100].
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 3]>,
}

#[inline]
fn srgb_to_linear(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIELAB.
///
/// The reference white is the XYZ of sRGB white under the matrix above, so
/// (255, 255, 255) lands exactly on L = 100, a = b = 0.
pub fn rgb_to_lab(img: &ImageBuffer) -> LabImage {
    let mut lut = [0.0f64; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = srgb_to_linear(i as u8);
    }
    let white: [f64; 3] = std::array::from_fn(|i| RGB_TO_XYZ[i].iter().sum());
    let values = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            let lin = [lut[r as usize], lut[g as usize], lut[b as usize]];
            let xyz: [f64; 3] = std::array::from_fn(|i| {
                RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2]
            });
            let fx = lab_f(xyz[0] / white[0]);
            let fy = lab_f(xyz[1] / white[1]);
            let fz = lab_f(xyz[2] / white[2]);
            let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
            [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
        })
        .collect();
    LabImage {
        width: img.width(),
        height: img.height(),
        values,
    }
}

/// Rectangular window into a [`Plane`].
#[derive(Clone, Copy, Debug)]
pub struct BlockView<'a> {
    plane: &'a Plane,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl<'a> BlockView<'a> {
    pub fn rows(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        let plane = self.plane;
        let (x0, w) = (self.x0, self.width);
        (self.y0..self.y0 + self.height).map(move |y| &plane.row(y)[x0..x0 + w])
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows().flat_map(|r| r.iter().copied())
    }

    /// (min, max) over the block.
    pub fn extrema(&self) -> (f64, f64) {
        self.values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tiles `plane` into `k1` blocks along the width and `k2` along the height.
///
/// Remainder columns/rows that do not fill a whole block are dropped.
pub fn partition_blocks(plane: &Plane, k1: usize, k2: usize) -> Result<Vec<BlockView<'_>>> {
    if k1 == 0 || k2 == 0 || k1 > plane.width || k2 > plane.height {
        return Err(Error::InvalidPartition {
            width: plane.width,
            height: plane.height,
            k1,
            k2,
        });
    }
    let bw = plane.width / k1;
    let bh = plane.height / k2;
    let mut blocks = Vec::with_capacity(k1 * k2);
    for j in 0..k2 {
        for i in 0..k1 {
            blocks.push(BlockView {
                plane,
                x0: i * bw,
                y0: j * bh,
                width: bw,
                height: bh,
            });
        }
    }
    Ok(blocks)
}
