use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::image::Image;

/// Signed frequency index normalized by Nyquist, in `[-1, 1]`.
fn norm_freq(k: usize, n: usize) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    signed / (n as f64 / 2.0)
}

/// Ideal low-pass filter. Frequencies whose radius exceeds `cutoff` are
/// zeroed; the radius is normalized so the (Nyquist, Nyquist) corner sits at 1.
pub fn apply_ringing(img: &Image, cutoff: f64) -> Result<Image> {
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(invalid(format!("ringing cutoff must be in (0, 1], got {cutoff}")));
    }
    let (h, w) = (img.height(), img.width());
    let mut planner = FftPlanner::<f64>::new();
    let (fw, fh) = (planner.plan_fft_forward(w), planner.plan_fft_forward(h));
    let (iw, ih) = (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h));
    let keep: Vec<bool> = (0..h * w)
        .map(|i| {
            let (fy, fx) = (norm_freq(i / w, h), norm_freq(i % w, w));
            ((fy * fy + fx * fx) / 2.0).sqrt() <= cutoff
        })
        .collect();
    let scale = 1.0 / (h * w) as f64;
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| {
            let mut buf: Vec<Complex<f64>> = img.plane(c).into_iter().map(|v| Complex::new(v, 0.0)).collect();
            fft2(&mut buf, h, w, fw.as_ref(), fh.as_ref());
            for (v, &k) in buf.iter_mut().zip(&keep) {
                if !k {
                    *v = Complex::new(0.0, 0.0);
                }
            }
            fft2(&mut buf, h, w, iw.as_ref(), ih.as_ref());
            buf.iter().map(|v| v.re * scale).collect()
        })
        .collect();
    Ok(Image::from_planes(h, w, &planes))
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, rows: &dyn rustfft::Fft<f64>, cols: &dyn rustfft::Fft<f64>) {
    for row in buf.chunks_mut(w) {
        rows.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        cols.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}
