use std::collections::VecDeque;

use super::filter::{convolve_separable, correlate, gaussian_kernel, ksize_for, reflect};
use super::style::LAPLACE_KERNEL;
use crate::error::{invalid, Result};
use crate::image::Image;

const CANNY_SIGMA: f64 = 1.0;

/// Sobel gradients scaled by 1/8 so a unit step yields magnitude ≤ 1.
fn sobel(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let gx = correlate(plane, h, w, &[-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0], 3);
    let gy = correlate(plane, h, w, &[-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0], 3);
    (gx.into_iter().map(|v| v / 8.0).collect(), gy.into_iter().map(|v| v / 8.0).collect())
}

/// Full Canny pipeline on the luma; the binary edge map is replicated to
/// three channels.
pub fn edge_canny(img: &Image, low: f64, high: f64) -> Result<Image> {
    if !(0.0 <= low && low < high && high <= 1.0) {
        return Err(invalid(format!("canny thresholds need 0 <= low < high <= 1, got {low}, {high}")));
    }
    let (h, w) = (img.height(), img.width());
    let smooth = convolve_separable(&img.luma(), h, w, &gaussian_kernel(CANNY_SIGMA, ksize_for(CANNY_SIGMA)));
    let (gx, gy) = sobel(&smooth, h, w);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let at = |y: isize, x: isize| mag[reflect(y, h) * w + reflect(x, w)];
    let mut thin = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let deg = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (yi, xi) = (y as isize, x as isize);
            if m > at(yi - dy, xi - dx) && m >= at(yi + dy, xi + dx) {
                thin[i] = m;
            }
        }
    }
    let mut edge = vec![false; h * w];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            edge[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edge[j] && thin[j] >= low && thin[j] > 0.0 {
                    edge[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    let plane: Vec<f64> = edge.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
    Ok(Image::gray(h, w, &plane, 3))
}

/// Absolute 4-neighbour Laplacian of the luma, replicated to three channels.
pub fn edge_laplacian(img: &Image) -> Image {
    let (h, w) = (img.height(), img.width());
    let resp = correlate(&img.luma(), h, w, &LAPLACE_KERNEL, 3);
    let plane: Vec<f64> = resp.iter().map(|v| v.abs()).collect();
    Image::gray(h, w, &plane, 3)
}
