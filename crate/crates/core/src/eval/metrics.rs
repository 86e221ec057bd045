use crate::error::{Error, Result};
use crate::image::Image;
use crate::synth::filter::gaussian_kernel;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )))
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(s / a.len() as f64)
}

/// Peak signal-to-noise ratio for unit peak over all channels;
/// `f64::INFINITY` when the images are identical.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// Mean absolute error on the 0–255 scale.
pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum();
    Ok(255.0 * s / a.len() as f64)
}

/// Separable filtering keeping only fully covered positions.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ho, wo) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            tmp[y * wo + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (0..n).map(|i| k[i] * tmp[(y + i) * wo + x]).sum();
        }
    }
    (out, ho, wo)
}

/// Structural similarity of the luma planes, Gaussian-weighted 11×11
/// windows, averaged over valid window positions.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ShapeMismatch(format!("{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let (la, lb) = (a.luma(), b.luma());
    let k = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (ma, _, _) = filter_valid(&la, h, w, &k);
    let (mb, _, _) = filter_valid(&lb, h, w, &k);
    let (saa, _, _) = filter_valid(&prod(&la, &la), h, w, &k);
    let (sbb, _, _) = filter_valid(&prod(&lb, &lb), h, w, &k);
    let (sab, _, _) = filter_valid(&prod(&la, &lb), h, w, &k);
    let (c1, c2) = (K1 * K1, K2 * K2);
    let total: f64 = (0..ma.len())
        .map(|i| {
            let (mx, my) = (ma[i], mb[i]);
            let vx = saa[i] - mx * mx;
            let vy = sbb[i] - my * my;
            let cxy = sab[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / ma.len() as f64)
}

/// Mean and population standard deviation. Infinite entries are handled
/// so that an all-infinite sample has mean ∞ and deviation 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean.is_infinite() {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
