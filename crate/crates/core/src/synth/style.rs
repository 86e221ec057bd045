use super::filter::{convolve_separable, correlate, gaussian_kernel, ksize_for, median3x3};
use crate::error::{invalid, Result};
use crate::image::Image;

const DODGE_EPS: f64 = 1e-6;

pub(crate) const LAPLACE_KERNEL: [f64; 9] = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];

/// Color-dodge pencil sketch of the luma, replicated to three channels.
pub fn stylize_pencil(img: &Image, blur_sigma: f64) -> Result<Image> {
    if !(blur_sigma > 0.0 && blur_sigma.is_finite()) {
        return Err(invalid(format!("pencil blur sigma must be > 0, got {blur_sigma}")));
    }
    let (h, w) = (img.height(), img.width());
    let g = img.luma();
    let inv: Vec<f64> = g.iter().map(|v| 1.0 - v).collect();
    let blurred = convolve_separable(&inv, h, w, &gaussian_kernel(blur_sigma, ksize_for(blur_sigma)));
    let out: Vec<f64> = g.iter().zip(&blurred).map(|(&g, &b)| (g / (1.0 - b).max(DODGE_EPS)).min(1.0)).collect();
    Ok(Image::gray(h, w, &out, 3))
}

/// Uniform quantizer onto `levels` values in `[0, 1]`.
pub fn quantize_levels(v: f32, levels: usize) -> f32 {
    let l = (levels - 1) as f32;
    (v * l).round() / l
}

/// Median smoothing, per-channel quantization, then darkening along
/// Laplacian edges of the quantized luma.
pub fn stylize_cartoon(img: &Image, levels: usize, smooth_iters: usize) -> Result<Image> {
    if levels < 2 {
        return Err(invalid(format!("cartoon needs at least 2 levels, got {levels}")));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut planes: Vec<Vec<f64>> = (0..c).map(|ch| img.plane(ch)).collect();
    for _ in 0..smooth_iters {
        planes = planes.iter().map(|p| median3x3(p, h, w)).collect();
    }
    let quant: Vec<Vec<f32>> =
        planes.iter().map(|p| p.iter().map(|&v| quantize_levels(v as f32, levels)).collect()).collect();
    let luma: Vec<f64> = if c == 3 {
        (0..h * w)
            .map(|i| (0..3).map(|ch| crate::image::LUMA[ch] * quant[ch][i] as f64).sum())
            .collect()
    } else {
        quant[0].iter().map(|&v| v as f64).collect()
    };
    let edges = correlate(&luma, h, w, &LAPLACE_KERNEL, 3);
    let mut data = vec![0f32; h * w * c];
    for i in 0..h * w {
        let keep = 1.0 - (2.0 * edges[i].abs()).min(1.0);
        for ch in 0..c {
            data[i * c + ch] = if keep == 1.0 { quant[ch][i] } else { (quant[ch][i] as f64 * keep) as f32 };
        }
    }
    Ok(Image::clamped(h, w, c, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pencil_of_constant_is_white() {
        let img = Image::constant(16, 16, 3, 0.37).unwrap();
        let out = stylize_pencil(&img, 2.0).unwrap();
        assert!(out.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        assert_eq!(out.channels(), 3);
        assert!(stylize_pencil(&img, 0.0).is_err());
    }

    #[test]
    fn cartoon_constant_on_grid_is_identity() {
        let img = Image::constant(16, 16, 3, 0.4).unwrap();
        assert_eq!(stylize_cartoon(&img, 256, 0).unwrap(), img);
        assert!(stylize_cartoon(&img, 1, 0).is_err());
    }

    #[test]
    fn quantizer_is_idempotent() {
        for levels in [2, 5, 8, 256] {
            for i in 0..=1000 {
                let q = quantize_levels(i as f32 / 1000.0, levels);
                assert_eq!(quantize_levels(q, levels), q);
            }
        }
    }
}
