//! Binary PPM (P6) emission. Bit-exact and dependency-free, so image outputs
//! can be compared byte for byte in tests.

use std::fs;
use std::path::Path;

use imle_core::Vec64;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpmImage {
    pub width: usize,
    pub height: usize,
    /// RGB triplets, row-major.
    pub rgb: Vec<u8>,
}

impl PpmImage {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0; 3 * width * height],
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend_from_slice(&self.rgb);
        fs::write(path, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// round(255 * v), half away from zero, clamped to [0, 1] first (identity
/// output nets can step outside the unit interval).
pub fn to_pixel(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

fn blit(image: &mut PpmImage, sample: &Vec64, h: usize, w: usize, row0: usize, col0: usize) {
    for y in 0..h {
        for x in 0..w {
            let p = to_pixel(sample[y * w + x]);
            let o = 3 * ((row0 + y) * image.width + col0 + x);
            image.rgb[o] = p;
            image.rgb[o + 1] = p;
            image.rgb[o + 2] = p;
        }
    }
}

/// Rasterize samples row-major into a grid of `cols` columns; grayscale is
/// replicated to RGB and trailing cells stay black.
pub fn raster_grid(
    samples: &[Vec64],
    shape: [usize; 2],
    cols: usize,
) -> Result<PpmImage, CliError> {
    let [h, w] = shape;
    if cols == 0 {
        return Err(CliError::Config("grid needs at least one column".into()));
    }
    for s in samples {
        if s.dim() != h * w {
            return Err(CliError::Config(format!(
                "sample dim {} is not rasterizable as {h}x{w}",
                s.dim()
            )));
        }
    }
    let rows = samples.len().div_ceil(cols);
    let mut image = PpmImage::black(cols * w, rows.max(1) * h);
    for (i, s) in samples.iter().enumerate() {
        blit(&mut image, s, h, w, (i / cols) * h, (i % cols) * w);
    }
    Ok(image)
}

/// Rasterize interpolation segments, one grid row per segment.
pub fn raster_segments(
    segments: &[Vec<Vec64>],
    shape: [usize; 2],
) -> Result<PpmImage, CliError> {
    let [h, w] = shape;
    let steps = segments.first().map_or(0, Vec::len);
    if steps == 0 {
        return Err(CliError::Config("no interpolation segments".into()));
    }
    let mut image = PpmImage::black(steps * w, segments.len() * h);
    for (r, seg) in segments.iter().enumerate() {
        for (c, s) in seg.iter().enumerate() {
            if s.dim() != h * w {
                return Err(CliError::Config(format!(
                    "sample dim {} is not rasterizable as {h}x{w}",
                    s.dim()
                )));
            }
            blit(&mut image, s, h, w, r * h, c * w);
        }
    }
    Ok(image)
}
