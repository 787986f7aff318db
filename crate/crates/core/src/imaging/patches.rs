//! Overlapping square patches and their reassembly by averaging.

use nalgebra::DMatrix;

use crate::error::{invalid, mismatch, AolError, Result};
use crate::signal::SignalBatch;

use super::image::GrayImage;

/// All `p x p` patches of an image. Column `n` of `batch` is the patch with
/// top-left corner `coords[n] = (row, col)`, vectorised column by column
/// (pixel `(row + r, col + c)` sits at index `c p + r`).
#[derive(Clone, Debug)]
pub struct PatchSet {
    pub batch: SignalBatch,
    pub coords: Vec<(usize, usize)>,
    pub patch: usize,
    pub height: usize,
    pub width: usize,
}

/// `(h - p + 1)(w - p + 1)`.
pub fn patch_count(height: usize, width: usize, p: usize) -> usize {
    if p == 0 || p > height || p > width {
        0
    } else {
        (height - p + 1) * (width - p + 1)
    }
}

pub fn extract_patches(img: &GrayImage, p: usize) -> Result<PatchSet> {
    let (h, w) = (img.height(), img.width());
    if p == 0 || p > h || p > w {
        return Err(invalid(format!("patch size {p} does not fit a {h}x{w} image")));
    }
    let mut coords = Vec::with_capacity(patch_count(h, w, p));
    for col in 0..=w - p {
        for row in 0..=h - p {
            coords.push((row, col));
        }
    }
    let pixels = img.pixels();
    let mut data = DMatrix::zeros(p * p, coords.len());
    for (n, &(row, col)) in coords.iter().enumerate() {
        let mut dst = data.column_mut(n);
        for c in 0..p {
            for r in 0..p {
                dst[c * p + r] = pixels[(row + r, col + c)];
            }
        }
    }
    Ok(PatchSet {
        batch: SignalBatch::new(data)?,
        coords,
        patch: p,
        height: h,
        width: w,
    })
}

/// Every pixel becomes the mean of all patch values covering it.
///
/// The mean is accumulated incrementally, so a pixel whose copies all agree
/// is reproduced exactly.
pub fn reassemble_average(
    patches: &DMatrix<f64>,
    coords: &[(usize, usize)],
    p: usize,
    height: usize,
    width: usize,
) -> Result<GrayImage> {
    if patches.nrows() != p * p || patches.ncols() != coords.len() {
        return Err(mismatch(
            format!("{}x{}", p * p, coords.len()),
            format!("{}x{}", patches.nrows(), patches.ncols()),
        ));
    }
    let mut mean = DMatrix::<f64>::zeros(height, width);
    let mut count = DMatrix::<u32>::zeros(height, width);
    for (n, &(row, col)) in coords.iter().enumerate() {
        if row + p > height || col + p > width {
            return Err(invalid(format!("patch at ({row}, {col}) leaves the {height}x{width} image")));
        }
        let src = patches.column(n);
        for c in 0..p {
            for r in 0..p {
                let idx = (row + r, col + c);
                count[idx] += 1;
                mean[idx] += (src[c * p + r] - mean[idx]) / f64::from(count[idx]);
            }
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(AolError::UncoveredPixel(i % height, i / height));
    }
    GrayImage::new(mean)
}

impl PatchSet {
    /// Reassembles a processed copy of this set's patches.
    pub fn reassemble(&self, patches: &DMatrix<f64>) -> Result<GrayImage> {
        reassemble_average(patches, &self.coords, self.patch, self.height, self.width)
    }
}
