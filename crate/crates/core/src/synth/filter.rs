//! Planar filtering helpers shared by the task operators. Planes are
//! row-major `f64` buffers; borders use half-sample symmetric reflection
//! (`… 2 1 0 | 0 1 2 …`), under which every normalized kernel preserves the
//! plane's sum exactly.

/// Maps any integer coordinate into `[0, n)` by symmetric reflection.
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Default odd kernel size covering ±3σ.
pub fn ksize_for(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil().max(0.0) as usize + 1
}

/// Normalized 1-D Gaussian; a delta when `sigma == 0`.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Vec<f64> {
    let r = (ksize / 2) as isize;
    if sigma == 0.0 {
        return (-r..=r).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    }
    let k: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable convolution with the same 1-D kernel along both axes.
pub fn convolve_separable(plane: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * row[reflect(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            for (o, &s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Dense 2-D correlation with a square odd `k×k` kernel.
pub fn correlate(plane: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
    debug_assert_eq!(kernel.len(), k * k);
    let r = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for ky in 0..k {
                let sy = reflect(y as isize + ky as isize - r, h);
                for kx in 0..k {
                    let sx = reflect(x as isize + kx as isize - r, w);
                    s += kernel[ky * k + kx] * plane[sy * w + sx];
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}

pub fn median3x3(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let mut win = [0.0f64; 9];
    for y in 0..h {
        for x in 0..w {
            let mut i = 0;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    win[i] = plane[reflect(y as isize + dy, h) * w + reflect(x as isize + dx, w)];
                    i += 1;
                }
            }
            win.sort_by(f64::total_cmp);
            out[y * w + x] = win[4];
        }
    }
    out
}
