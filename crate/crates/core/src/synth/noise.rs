use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::seed;

/// Additive i.i.d. Gaussian noise, `clamp(img + N(0, sigma²))`.
pub fn apply_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("gaussian noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let data = img.data().iter().map(|&v| (v as f64 + normal.sample(&mut rng)) as f32).collect();
    Ok(Image::clamped(img.height(), img.width(), img.channels(), data))
}

/// Shot noise: `Poisson(img·peak) / peak`.
pub fn apply_poisson_noise(img: &Image, peak: f64, seed: u64) -> Result<Image> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(invalid(format!("poisson peak must be > 0, got {peak}")));
    }
    let mut rng = seed::rng(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let lambda = v as f64 * peak;
            if lambda <= 0.0 {
                0.0
            } else {
                let k: f64 = Poisson::new(lambda).expect("positive rate").sample(&mut rng);
                (k / peak) as f32
            }
        })
        .collect();
    Ok(Image::clamped(img.height(), img.width(), img.channels(), data))
}

/// Replaces each pixel (all channels) with black or white, equiprobably,
/// with probability `p`.
pub fn apply_salt_pepper(img: &Image, p: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("salt & pepper probability must be in [0, 1], got {p}")));
    }
    let mut rng = seed::rng(seed);
    let c = img.channels();
    let mut data = img.data().to_vec();
    for px in data.chunks_mut(c) {
        if rng.gen::<f64>() < p {
            let v = if rng.gen::<bool>() { 1.0 } else { 0.0 };
            px.iter_mut().for_each(|x| *x = v);
        }
    }
    Ok(Image::clamped(img.height(), img.width(), c, data))
}
