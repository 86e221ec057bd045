//! Baseline-JPEG-style lossy round trip: YCbCr, 8×8 DCT, table quantization.
//! No entropy coding and no chroma subsampling; the loss comes entirely from
//! quantization, which is what the artifacts look like.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::image::Image;

#[rustfmt::skip]
const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[rustfmt::skip]
const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// IJG quality scaling of a base table.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

/// `cos((2x+1)uπ/16)·C(u)/2`, indexed `[u][x]`.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let cu = if u == 0 { (0.5f64).sqrt() } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
            }
        }
        b
    })
}

fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Quantizes one `0..255`-scale plane block-wise; the plane is edge-padded
/// to multiples of 8 and cropped back.
fn quantize_plane(plane: &[f64], h: usize, w: usize, table: &[f64; 64]) -> Vec<f64> {
    let (ph, pw) = (h.div_ceil(8) * 8, w.div_ceil(8) * 8);
    let mut out = vec![0.0; h * w];
    let mut block = [0.0; 64];
    for by in (0..ph).step_by(8) {
        for bx in (0..pw).step_by(8) {
            for y in 0..8 {
                for x in 0..8 {
                    let sy = (by + y).min(h - 1);
                    let sx = (bx + x).min(w - 1);
                    block[y * 8 + x] = plane[sy * w + sx] - 128.0;
                }
            }
            let mut coef = dct8x8(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                *c = (*c / q).round() * q;
            }
            let rec = idct8x8(&coef);
            for y in 0..8 {
                for x in 0..8 {
                    let (oy, ox) = (by + y, bx + x);
                    if oy < h && ox < w {
                        out[oy * w + ox] = rec[y * 8 + x] + 128.0;
                    }
                }
            }
        }
    }
    out
}

/// JPEG-like compression at `quality ∈ [1, 100]`.
pub fn apply_jpeg_like(img: &Image, quality: u32) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(invalid(format!("jpeg quality must be in [1, 100], got {quality}")));
    }
    let (h, w) = (img.height(), img.width());
    let luma_q = scaled_table(&LUMA_TABLE, quality as u8);
    if img.channels() == 1 {
        let y: Vec<f64> = img.plane(0).iter().map(|v| v * 255.0).collect();
        let rec = quantize_plane(&y, h, w, &luma_q);
        return Ok(Image::from_planes(h, w, &[rec.iter().map(|v| v / 255.0).collect()]));
    }
    let chroma_q = scaled_table(&CHROMA_TABLE, quality as u8);
    let n = h * w;
    let (mut yy, mut cb, mut cr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, px) in img.data().chunks(3).enumerate() {
        let (r, g, b) = (px[0] as f64 * 255.0, px[1] as f64 * 255.0, px[2] as f64 * 255.0);
        yy[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        cb[i] = -0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0;
        cr[i] = 0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0;
    }
    let yy = quantize_plane(&yy, h, w, &luma_q);
    let cb = quantize_plane(&cb, h, w, &chroma_q);
    let cr = quantize_plane(&cr, h, w, &chroma_q);
    let mut planes = vec![vec![0.0; n]; 3];
    for i in 0..n {
        let (y, u, v) = (yy[i], cb[i] - 128.0, cr[i] - 128.0);
        planes[0][i] = (y + 1.402 * v) / 255.0;
        planes[1][i] = (y - 0.344_136 * u - 0.714_136 * v) / 255.0;
        planes[2][i] = (y + 1.772 * u) / 255.0;
    }
    Ok(Image::from_planes(h, w, &planes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_round_trip() {
        let mut block = [0.0; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i * 37) % 255) as f64 - 128.0;
        }
        let rec = idct8x8(&dct8x8(&block));
        for (a, b) in block.iter().zip(&rec) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn table_scaling_endpoints() {
        assert!(scaled_table(&LUMA_TABLE, 100).iter().all(|&v| v == 1.0));
        assert_eq!(scaled_table(&LUMA_TABLE, 50)[0], 16.0);
        assert_eq!(scaled_table(&LUMA_TABLE, 1)[0], 255.0);
    }

    #[test]
    fn constant_blocks_stay_constant() {
        let img = Image::from_fn(16, 24, 3, |y, x, c| {
            let block = (y / 8) * 3 + x / 8;
            [0.2, 0.55, 0.8][(block + c) % 3]
        })
        .unwrap();
        let out = apply_jpeg_like(&img, 50).unwrap();
        for by in 0..2 {
            for bx in 0..3 {
                for c in 0..3 {
                    let v0 = out.get(by * 8, bx * 8, c);
                    for y in 0..8 {
                        for x in 0..8 {
                            assert!((out.get(by * 8 + y, bx * 8 + x, c) - v0).abs() < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn quality_range_enforced() {
        let img = Image::constant(8, 8, 3, 0.5).unwrap();
        assert!(apply_jpeg_like(&img, 0).is_err());
        assert!(apply_jpeg_like(&img, 101).is_err());
    }
}
