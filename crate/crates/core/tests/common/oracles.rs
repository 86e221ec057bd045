use rand::Rng;
use vpip::Image;

use super::rand_image;

pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Direct 2-D convolution with the outer-product Gaussian.
pub fn brute_blur(img: &Image, sigma: f64, ksize: usize) -> Vec<f64> {
    let r = (ksize / 2) as isize;
    let g: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut out = Vec::with_capacity(h * w * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut s = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.get(mirror(y as isize + dy, h), mirror(x as isize + dx, w), ch) as f64;
                        s += g[(dy + r) as usize] * g[(dx + r) as usize] * v;
                    }
                }
                out.push((s / norm).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Absolute 4-neighbour Laplacian of the luma by direct summation.
pub fn brute_laplacian(img: &Image) -> Vec<f64> {
    let k = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];
    let (h, w) = (img.height(), img.width());
    let luma = |y: usize, x: usize| {
        0.299 * img.get(y, x, 0) as f64 + 0.587 * img.get(y, x, 1) as f64 + 0.114 * img.get(y, x, 2) as f64
    };
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (dy, row) in k.iter().enumerate() {
                for (dx, kv) in row.iter().enumerate() {
                    s += kv * luma(mirror(y as isize + dy as isize - 1, h), mirror(x as isize + dx as isize - 1, w));
                }
            }
            out.push(s.abs().min(1.0));
        }
    }
    out
}

/// Second image correlated with the first so SSIM is informative.
pub fn random_pair(seed: u64) -> (Image, Image) {
    let mut r = vpip::seed::rng(seed);
    let (h, w) = (r.gen_range(11..30), r.gen_range(11..30));
    let a = rand_image(h, w, 3, seed * 2 + 1);
    let amount: f32 = r.gen_range(0.0..0.5);
    let data = a.data().iter().map(|&v| (v + amount * r.gen_range(-1.0f32..1.0)).clamp(0.0, 1.0)).collect();
    (a, Image::new(h, w, 3, data).unwrap())
}

pub fn brute_psnr(a: &Image, b: &Image) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a.data()[i] as f64 - b.data()[i] as f64;
        s += d * d;
    }
    10.0 * (1.0 / (s / a.len() as f64)).log10()
}

pub fn brute_mae(a: &Image, b: &Image) -> f64 {
    let mut s = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            for c in 0..a.channels() {
                s += (a.get(y, x, c) as f64 - b.get(y, x, c) as f64).abs();
            }
        }
    }
    s * 255.0 / a.len() as f64
}

pub fn brute_ssim(a: &Image, b: &Image) -> f64 {
    let luma = |img: &Image, y: usize, x: usize| {
        0.299 * img.get(y, x, 0) as f64 + 0.587 * img.get(y, x, 1) as f64 + 0.114 * img.get(y, x, 2) as f64
    };
    let mut wts = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in wts.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for y0 in 0..=a.height() - 11 {
        for x0 in 0..=a.width() - 11 {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let w = wts[i][j] / total;
                    mx += w * luma(a, y0 + i, x0 + j);
                    my += w * luma(b, y0 + i, x0 + j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let w = wts[i][j] / total;
                    let (dx, dy) = (luma(a, y0 + i, x0 + j) - mx, luma(b, y0 + i, x0 + j) - my);
                    vx += w * dx * dx;
                    vy += w * dy * dy;
                    cov += w * dx * dy;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}
