//! Operator rows tiled as square patches.

use aol_core::imaging::GrayImage;
use aol_core::AnalysisOperator;
use nalgebra::DMatrix;

use crate::error::CliError;

/// Each row becomes a `p x p` tile (column-major, as patches are
/// vectorised), stretched to `[0, 255]`, with a one-pixel border.
pub fn operator_montage(op: &AnalysisOperator, p: usize) -> Result<GrayImage, CliError> {
    if p * p != op.dim() {
        return Err(CliError::config(format!(
            "operator dimension {} is not a square patch size",
            op.dim()
        )));
    }
    let k = op.num_rows();
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let mut canvas = DMatrix::from_element(rows * (p + 1) + 1, cols * (p + 1) + 1, 255.0);
    for (idx, row) in op.rows().row_iter().enumerate() {
        let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let span = hi - lo;
        let top = (idx / cols) * (p + 1) + 1;
        let left = (idx % cols) * (p + 1) + 1;
        for c in 0..p {
            for r in 0..p {
                let v = row[c * p + r];
                canvas[(top + r, left + c)] = if span > 0.0 { 255.0 * (v - lo) / span } else { 128.0 };
            }
        }
    }
    Ok(GrayImage::new(canvas)?)
}

/// Side of the square patch matching `dim`, if any.
pub fn patch_side(dim: usize) -> Option<usize> {
    let p = (dim as f64).sqrt().round() as usize;
    (p * p == dim).then_some(p)
}
