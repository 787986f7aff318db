//! Image side: the phantom, patches, noise, PSNR, PGM files and the
//! patch-based denoiser.

pub mod denoise;
pub mod image;
pub mod patches;
pub mod pgm;
pub mod phantom;

pub use denoise::{denoise_image, denoise_patch, AnalysisDenoiser, DenoiseConfig, DenoiseReport, Fidelity};
pub use image::{add_gaussian_noise, mean_squared_error, psnr, GrayImage, DEFAULT_PEAK};
pub use patches::{extract_patches, reassemble_average, PatchSet};
pub use pgm::{read_pgm, write_pgm, PgmFormat};
pub use phantom::shepp_logan;
