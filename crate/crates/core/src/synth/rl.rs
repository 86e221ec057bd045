use super::filter::{convolve_separable, gaussian_kernel, ksize_for};
use crate::error::{invalid, Result};
use crate::image::Image;

const RATIO_EPS: f64 = 1e-12;

/// Richardson–Lucy deconvolution of one plane with a symmetric separable
/// PSF (so the adjoint PSF equals the PSF). Starts from the observation;
/// `on_iterate` sees every iterate.
pub fn richardson_lucy(
    observed: &[f64],
    h: usize,
    w: usize,
    psf: &[f64],
    iters: usize,
    mut on_iterate: impl FnMut(usize, &[f64]),
) -> Vec<f64> {
    let mut x = observed.iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    for it in 0..iters {
        let est = convolve_separable(&x, h, w, psf);
        let ratio: Vec<f64> = observed.iter().zip(&est).map(|(&y, &e)| y / e.max(RATIO_EPS)).collect();
        let corr = convolve_separable(&ratio, h, w, psf);
        for (xv, c) in x.iter_mut().zip(corr) {
            *xv *= c;
        }
        on_iterate(it, &x);
    }
    x
}

/// Blurs with a Gaussian PSF, then deconvolves it again with `iters` RL
/// steps; the result carries RL's characteristic ringing and noise.
pub fn apply_rl_artifact(img: &Image, psf_sigma: f64, iters: usize) -> Result<Image> {
    if iters < 1 {
        return Err(invalid("richardson-lucy needs at least one iteration"));
    }
    if !(psf_sigma > 0.0 && psf_sigma.is_finite()) {
        return Err(invalid(format!("psf sigma must be > 0, got {psf_sigma}")));
    }
    let (h, w) = (img.height(), img.width());
    let psf = gaussian_kernel(psf_sigma, ksize_for(psf_sigma));
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| {
            let blurred = convolve_separable(&img.plane(c), h, w, &psf);
            richardson_lucy(&blurred, h, w, &psf, iters, |_, _| {})
        })
        .collect();
    Ok(Image::from_planes(h, w, &planes))
}
