//! Per-pixel SSIM between a real frame and its manipulated counterpart, and
//! the binary difference mask derived from it.

use image::RgbImage;
use thiserror::Error;

use crate::geometry::BinaryMask;

pub const DEFAULT_WINDOW: u32 = 11;
pub const DEFAULT_SSIM_THRESHOLD: f64 = 0.5;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimMaskError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(u32, u32, u32, u32),
    #[error("window {window} must be odd, >= 3 and <= {max}")]
    BadWindow { window: u32, max: u32 },
    #[error("luminance value out of [0, 1]")]
    OutOfRange,
}

/// Luminance raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, SimMaskError> {
        if width == 0 || height == 0 {
            return Err(SimMaskError::EmptyImage);
        }
        if data.len() != width as usize * height as usize {
            return Err(SimMaskError::DimMismatch(width, height, data.len() as u32, 1));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SimMaskError::OutOfRange);
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Result<Self, SimMaskError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl SsimMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pixels whose SSIM falls strictly below `threshold`.
    pub fn below(&self, threshold: f64) -> BinaryMask {
        let data = self.values.iter().map(|&v| v < threshold).collect();
        BinaryMask::from_vec(self.width, self.height, data).expect("dims match")
    }
}

/// BT.601 luma scaled to `[0, 1]`.
pub fn to_gray(image: &RgbImage) -> Result<GrayImage, SimMaskError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(SimMaskError::EmptyImage);
    }
    let data = image
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            ((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    Ok(GrayImage {
        width: image.width(),
        height: image.height(),
        data,
    })
}

/// Mirror index with the edge sample repeated (`d c b a | a b c d | d c b a`).
#[inline]
fn reflect(i: isize, n: isize) -> usize {
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Uniform `window`-sized local mean with reflective borders, separable.
fn box_mean(data: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let norm = 1.0 / window as f64;
    let mut rows = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for dx in -r..=r {
                acc += row[reflect(x as isize + dx, width as isize)];
            }
            rows[y * width + x] = acc * norm;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for dy in -r..=r {
                acc += rows[reflect(y as isize + dy, height as isize) * width + x];
            }
            out[y * width + x] = acc * norm;
        }
    }
    out
}

/// Per-pixel SSIM with a uniform `window`x`window` neighbourhood.
pub fn ssim_map(a: &GrayImage, b: &GrayImage, window: u32) -> Result<SsimMap, SimMaskError> {
    if a.width != b.width || a.height != b.height {
        return Err(SimMaskError::DimMismatch(a.width, a.height, b.width, b.height));
    }
    let max = a.width.min(a.height);
    if window.is_multiple_of(2) || window < 3 || window > max {
        return Err(SimMaskError::BadWindow { window, max });
    }
    let (w, h, win) = (a.width as usize, a.height as usize, window as usize);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);

    let aa: Vec<f64> = a.data.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.data.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();

    let mu_a = box_mean(&a.data, w, h, win);
    let mu_b = box_mean(&b.data, w, h, win);
    let e_aa = box_mean(&aa, w, h, win);
    let e_bb = box_mean(&bb, w, h, win);
    let e_ab = box_mean(&ab, w, h, win);

    let values = (0..w * h)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = (e_aa[i] - ma * ma).max(0.0);
            let var_b = (e_bb[i] - mb * mb).max(0.0);
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            (num / den).clamp(-1.0, 1.0)
        })
        .collect();
    Ok(SsimMap {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Marks pixels where the luma SSIM between `real` and `fake` is below
/// `ssim_threshold`, using the default 11-pixel window.
pub fn difference_mask(real: &RgbImage, fake: &RgbImage, ssim_threshold: f64) -> Result<BinaryMask, SimMaskError> {
    difference_mask_with_window(real, fake, ssim_threshold, DEFAULT_WINDOW)
}

pub fn difference_mask_with_window(
    real: &RgbImage,
    fake: &RgbImage,
    ssim_threshold: f64,
    window: u32,
) -> Result<BinaryMask, SimMaskError> {
    if real.dimensions() != fake.dimensions() {
        return Err(SimMaskError::DimMismatch(
            real.width(),
            real.height(),
            fake.width(),
            fake.height(),
        ));
    }
    let map = ssim_map(&to_gray(real)?, &to_gray(fake)?, window)?;
    Ok(map.below(ssim_threshold))
}
