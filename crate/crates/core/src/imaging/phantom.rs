//! The (modified) Shepp-Logan head phantom.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

use super::image::GrayImage;

/// `(intensity, semi-axis a, semi-axis b, centre x, centre y, angle in degrees)`
/// of the ten ellipses, on the square `[-1, 1]^2`. Intensities use the
/// high-contrast variant, so the image spans `[0, 1]` before scaling.
pub const ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// `n x n` phantom scaled to `[0, 255]`. Pixel `(i, j)` samples the point
/// `x = (2j + 1 - n)/n`, `y = (n - 2i - 1)/n`, so row 0 is the top.
pub fn shepp_logan(n: usize) -> Result<GrayImage> {
    if n < 8 {
        return Err(invalid(format!("phantom size must be at least 8, got {n}")));
    }
    let nf = n as f64;
    let coord = |k: usize| (2.0 * k as f64 + 1.0 - nf) / nf;
    let mut pixels = DMatrix::zeros(n, n);
    for &[value, a, b, x0, y0, deg] in &ELLIPSES {
        let (s, c) = deg.to_radians().sin_cos();
        for j in 0..n {
            let dx = coord(j) - x0;
            for i in 0..n {
                let y = -coord(i);
                let dy = y - y0;
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                    pixels[(i, j)] += value;
                }
            }
        }
    }
    pixels *= 255.0;
    GrayImage::new(pixels)
}
