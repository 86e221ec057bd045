use super::filter::{convolve_separable, gaussian_kernel, ksize_for};
use crate::error::{invalid, Result};
use crate::image::Image;

/// Separable Gaussian blur with a normalized `ksize`-tap kernel and
/// symmetric-reflection borders.
pub fn apply_gaussian_blur(img: &Image, sigma: f64, ksize: usize) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if ksize == 0 || ksize % 2 == 0 {
        return Err(invalid(format!("blur kernel size must be odd and >= 1, got {ksize}")));
    }
    if ksize == 1 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma, ksize);
    Ok(blur_planes(img, &kernel))
}

/// Gaussian blur with the default ±3σ support.
pub fn gaussian_blur_auto(img: &Image, sigma: f64) -> Result<Image> {
    apply_gaussian_blur(img, sigma, ksize_for(sigma))
}

pub(crate) fn blur_planes(img: &Image, kernel: &[f64]) -> Image {
    let (h, w) = (img.height(), img.width());
    let planes: Vec<Vec<f64>> =
        (0..img.channels()).map(|c| convolve_separable(&img.plane(c), h, w, kernel)).collect();
    Image::from_planes(h, w, &planes)
}
