//! Grayscale images, additive noise and PSNR.

use nalgebra::DMatrix;

use crate::error::{invalid, mismatch, Result};
use crate::rng::RandomSource;

pub const DEFAULT_PEAK: f64 = 255.0;

/// Real-valued grayscale image; `pixels[(row, col)]`, nominal range `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pixels: DMatrix<f64>,
}

impl GrayImage {
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(invalid("image has no pixels"));
        }
        if !pixels.iter().all(|v| v.is_finite()) {
            return Err(invalid("image contains non-finite pixels"));
        }
        Ok(Self { pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(height, width, value))
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> DMatrix<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[(row, col)]
    }
}

/// Adds i.i.d. `N(0, sigma^2)` to every pixel, without clipping.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, rng: &mut RandomSource) -> Result<GrayImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut pixels = img.pixels.clone();
    // Row-major draw order so the noise field does not depend on storage.
    for r in 0..pixels.nrows() {
        for c in 0..pixels.ncols() {
            pixels[(r, c)] += sigma * rng.gaussian();
        }
    }
    GrayImage::new(pixels)
}

pub fn mean_squared_error(x: &GrayImage, reference: &GrayImage) -> Result<f64> {
    if x.pixels.shape() != reference.pixels.shape() {
        return Err(mismatch(
            format!("{:?}", reference.pixels.shape()),
            format!("{:?}", x.pixels.shape()),
        ));
    }
    let n = x.pixels.len() as f64;
    Ok(x.pixels
        .iter()
        .zip(reference.pixels.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// `10 log10(peak^2 / MSE)` in dB; `+inf` for identical images.
pub fn psnr(x: &GrayImage, reference: &GrayImage, peak: f64) -> Result<f64> {
    let mse = mean_squared_error(x, reference)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_closed_forms() {
        let a = GrayImage::filled(4, 5, 10.0).unwrap();
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        let b = GrayImage::filled(4, 5, 10.0 + 255.0).unwrap();
        assert!(psnr(&b, &a, 255.0).unwrap().abs() < 1e-12);
        let c = GrayImage::filled(4, 5, 10.0 - 25.5).unwrap();
        assert!((psnr(&c, &a, 255.0).unwrap() - 20.0).abs() < 1e-12);
        let d = GrayImage::filled(5, 4, 10.0).unwrap();
        assert!(psnr(&d, &a, 255.0).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = RandomSource::seed_from_u64(1);
        let a = GrayImage::filled(3, 3, 7.0).unwrap();
        assert_eq!(add_gaussian_noise(&a, 0.0, &mut rng).unwrap(), a);
        assert!(add_gaussian_noise(&a, -1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_psnr_matches_closed_form() {
        let mut rng = RandomSource::seed_from_u64(2);
        let clean = GrayImage::filled(256, 256, 100.0).unwrap();
        for (sigma, expected) in [(12.8, 25.99), (45.0, 15.07)] {
            let noisy = add_gaussian_noise(&clean, sigma, &mut rng).unwrap();
            let p = psnr(&noisy, &clean, 255.0).unwrap();
            assert!((expected - 20.0 * (255.0 / sigma).log10()).abs() < 0.01);
            assert!((p - expected).abs() < 0.05, "sigma {sigma}: {p}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(GrayImage::new(DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(GrayImage::new(DMatrix::zeros(0, 3)).is_err());
    }
}
