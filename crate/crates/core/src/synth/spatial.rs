use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::filter::reflect;
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::seed;

/// Block-average by `factor`, then nearest-neighbour back to full size.
/// Edge blocks are truncated.
pub fn apply_pixelation(img: &Image, factor: usize) -> Result<Image> {
    if factor < 2 {
        return Err(invalid(format!("pixelation factor must be >= 2, got {factor}")));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = img.data().to_vec();
    for by in (0..h).step_by(factor) {
        for bx in (0..w).step_by(factor) {
            let (ey, ex) = ((by + factor).min(h), (bx + factor).min(w));
            let n = ((ey - by) * (ex - bx)) as f64;
            for ch in 0..c {
                let mut s = 0.0f64;
                for y in by..ey {
                    for x in bx..ex {
                        s += img.get(y, x, ch) as f64;
                    }
                }
                let mean = (s / n) as f32;
                for y in by..ey {
                    for x in bx..ex {
                        data[(y * w + x) * c + ch] = mean;
                    }
                }
            }
        }
    }
    Ok(Image::clamped(h, w, c, data))
}

/// Binary `H×W` mask; `true` marks a hole.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn fraction(&self) -> f64 {
        self.data.iter().filter(|&&m| m).count() as f64 / self.data.len() as f64
    }
}

/// Gray value written into holes.
pub const INPAINT_FILL: f32 = 0.5;

/// Punches rectangles and random-walk brush strokes into the image until the
/// masked fraction reaches `coverage` (always within ±20% of it).
pub fn apply_inpaint_mask(img: &Image, coverage: f64, seed: u64) -> Result<(Image, Mask)> {
    if !(coverage > 0.0 && coverage < 0.5) {
        return Err(invalid(format!("inpainting coverage must be in (0, 0.5), got {coverage}")));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let n = h * w;
    let lo = (0.8 * coverage * n as f64).ceil() as usize;
    let hi = (1.2 * coverage * n as f64).floor() as usize;
    if lo > hi || hi == 0 {
        return Err(invalid(format!("coverage {coverage} cannot be met on a {h}x{w} image")));
    }
    let target = ((coverage * n as f64).round() as usize).clamp(lo.max(1), hi);
    let mut rng = seed::rng(seed);
    let mut mask = vec![false; n];
    let mut count = 0usize;
    let side_cap = ((target as f64 / 4.0).sqrt().ceil() as usize).max(2);
    let mark = |y: isize, x: isize, mask: &mut Vec<bool>, count: &mut usize| {
        if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w && *count < target {
            let i = y as usize * w + x as usize;
            if !mask[i] {
                mask[i] = true;
                *count += 1;
            }
        }
    };
    while count < target {
        if rng.gen::<bool>() {
            let rh = rng.gen_range(1..=side_cap) as isize;
            let rw = rng.gen_range(1..=side_cap) as isize;
            let y0 = rng.gen_range(0..h) as isize;
            let x0 = rng.gen_range(0..w) as isize;
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    mark(y, x, &mut mask, &mut count);
                }
            }
        } else {
            let (mut y, mut x) = (rng.gen_range(0..h) as isize, rng.gen_range(0..w) as isize);
            let radius = rng.gen_range(0..=1isize);
            let steps = rng.gen_range(4..=16);
            for _ in 0..steps {
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        mark(y + dy, x + dx, &mut mask, &mut count);
                    }
                }
                y += rng.gen_range(-2..=2isize);
                x += rng.gen_range(-2..=2isize);
            }
        }
    }
    let mut data = img.data().to_vec();
    for (px, &m) in data.chunks_mut(c).zip(&mask) {
        if m {
            px.iter_mut().for_each(|v| *v = INPAINT_FILL);
        }
    }
    Ok((Image::clamped(h, w, c, data), Mask { height: h, width: w, data: mask }))
}

/// Additive white streaks at `angle` degrees from vertical, followed by a
/// 3-tap motion blur of the streak layer along the same direction. The
/// number of streaks is Poisson with mean `density` per 1000 pixels.
pub fn apply_rain_streaks(img: &Image, density: f64, angle: f64, seed: u64) -> Result<Image> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(invalid(format!("rain density must be > 0, got {density}")));
    }
    if !(-45.0..=45.0).contains(&angle) {
        return Err(invalid(format!("rain angle must be in [-45, 45], got {angle}")));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut rng = seed::rng(seed);
    let mean = density * (h * w) as f64 / 1000.0;
    let count = Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    if count == 0 {
        return Ok(img.clone());
    }
    let (dx, dy) = (angle.to_radians().sin(), angle.to_radians().cos());
    let max_len = (h.max(w) / 3).max(4);
    let mut layer = vec![0.0f64; h * w];
    for _ in 0..count {
        let (y0, x0) = (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64));
        let len = rng.gen_range(3..=max_len);
        let alpha = rng.gen_range(0.25..0.6);
        for t in 0..len {
            let y = (y0 + t as f64 * dy).round() as isize;
            let x = (x0 + t as f64 * dx).round() as isize;
            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                let i = y as usize * w + x as usize;
                layer[i] = layer[i].max(alpha);
            }
        }
    }
    let (sx, sy) = (dx.round() as isize, dy.round() as isize);
    let mut blurred = vec![0.0f64; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let at = |yy: isize, xx: isize| layer[reflect(yy, h) * w + reflect(xx, w)];
            blurred[y as usize * w + x as usize] = (at(y - sy, x - sx) + at(y, x) + at(y + sy, x + sx)) / 3.0;
        }
    }
    let mut data = img.data().to_vec();
    for (px, &s) in data.chunks_mut(c).zip(&blurred) {
        px.iter_mut().for_each(|v| *v += s as f32);
    }
    Ok(Image::clamped(h, w, c, data))
}
