//! Small image containers for the normal-map pipeline.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// Background encoding: a zero normal maps to 0.5 on every channel.
pub const BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];

/// Per-pixel camera-space normals encoded as `(n + 1) / 2`, with coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMapImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<[f64; 3]>,
    pub coverage: Vec<bool>,
}

impl NormalMapImage {
    pub fn background(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
            coverage: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn decoded(&self, x: usize, y: usize) -> [f64; 3] {
        self.get(x, y).map(|c| 2.0 * c - 1.0)
    }

    pub fn covered_fraction(&self) -> f64 {
        self.coverage.iter().filter(|&&c| c).count() as f64 / self.coverage.len() as f64
    }

    /// 8-bit luminance (Rec. 601 weights) of the encoded RGB scaled to 255.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .pixels
            .iter()
            .map(|p| {
                let y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                (y * 255.0).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let rgb: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|p| p.map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8))
            .collect();
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Rgb, &rgb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }
}

/// Binary image with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl EdgeMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize) {
        self.data[y * self.width + x] = 1;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Grayscale, &bytes)
    }
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

/// Morphological dilation with a `(2r + 1)²` square element, repeated `iterations` times.
pub fn dilate(mask: &EdgeMask, radius: usize, iterations: usize) -> EdgeMask {
    let (w, h) = (mask.width, mask.height);
    let mut current = mask.clone();
    for _ in 0..iterations {
        // separable: rows then columns
        let mut rows = EdgeMask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                if (lo..=hi).any(|xx| current.get(xx, y)) {
                    rows.set(x, y);
                }
            }
        }
        let mut out = EdgeMask::empty(w, h);
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(h - 1);
            for x in 0..w {
                if (lo..=hi).any(|yy| rows.get(x, yy)) {
                    out.set(x, y);
                }
            }
        }
        current = out;
    }
    current
}
