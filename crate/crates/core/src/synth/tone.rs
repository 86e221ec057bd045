use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::{Image, LUMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneKind {
    Brightness,
    Contrast,
    Saturation,
    Gamma,
}

impl ToneKind {
    pub const ALL: [ToneKind; 4] = [Self::Brightness, Self::Contrast, Self::Saturation, Self::Gamma];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Brightness => "brightness",
            Self::Contrast => "contrast",
            Self::Saturation => "saturation",
            Self::Gamma => "gamma",
        }
    }
}

impl fmt::Display for ToneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown tone adjustment '{s}'")))
    }
}

/// Global tone adjustment. `factor == 1` is the identity for every kind;
/// saturation additionally accepts 0 (pure luma).
pub fn adjust_tone(img: &Image, kind: ToneKind, factor: f64) -> Result<Image> {
    let ok = factor.is_finite() && (factor > 0.0 || (kind == ToneKind::Saturation && factor == 0.0));
    if !ok {
        return Err(invalid(format!("{kind} factor must be > 0, got {factor}")));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let data: Vec<f32> = match kind {
        ToneKind::Brightness => img.data().iter().map(|&v| (v as f64 * factor) as f32).collect(),
        ToneKind::Contrast => img.data().iter().map(|&v| ((v as f64 - 0.5) * factor + 0.5) as f32).collect(),
        ToneKind::Gamma => img.data().iter().map(|&v| (v as f64).powf(factor) as f32).collect(),
        ToneKind::Saturation => {
            if c == 1 {
                return Ok(img.clone());
            }
            img.data()
                .chunks(3)
                .flat_map(|p| {
                    let l: f64 = p.iter().zip(LUMA).map(|(&v, k)| v as f64 * k).sum();
                    let mix = move |v: f32| (v as f64 * factor + l * (1.0 - factor)) as f32;
                    [mix(p[0]), mix(p[1]), mix(p[2])]
                })
                .collect()
        }
    };
    Ok(Image::clamped(h, w, c, data))
}

/// Per-channel 256-bin histogram equalization. A channel occupying a single
/// bin is left unchanged.
pub fn hist_equalize(img: &Image) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let n = (h * w) as f64;
    let mut data = img.data().to_vec();
    for ch in 0..c {
        let bin = |v: f32| ((v as f64 * 255.0).round() as usize).min(255);
        let mut hist = [0usize; 256];
        for px in img.data().chunks(c) {
            hist[bin(px[ch])] += 1;
        }
        let mut cdf = [0.0f64; 256];
        let mut acc = 0usize;
        for (b, &count) in hist.iter().enumerate() {
            acc += count;
            cdf[b] = acc as f64 / n;
        }
        let cdf_min = hist.iter().position(|&k| k > 0).map(|b| cdf[b]).unwrap_or(1.0);
        if cdf_min >= 1.0 {
            continue;
        }
        for px in data.chunks_mut(c) {
            px[ch] = ((cdf[bin(px[ch])] - cdf_min) / (1.0 - cdf_min)) as f32;
        }
    }
    Image::clamped(h, w, c, data)
}

/// Smooth S-shaped contrast curve `x − s·sin(2πx)/(2π)`, monotone for
/// `0 ≤ s < 1` and fixing 0, ½ and 1.
pub fn tone_curve(img: &Image, strength: f64) -> Result<Image> {
    if !(0.0..1.0).contains(&strength) {
        return Err(invalid(format!("tone curve strength must be in [0, 1), got {strength}")));
    }
    let tau = std::f64::consts::TAU;
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let x = v as f64;
            (x - strength * (tau * x).sin() / tau) as f32
        })
        .collect();
    Ok(Image::clamped(img.height(), img.width(), img.channels(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured() -> Image {
        Image::from_fn(24, 24, 3, |y, x, c| ((y * 7 + x * 13 + c * 29) % 41) as f32 / 40.0).unwrap()
    }

    #[test]
    fn unit_factor_is_identity() {
        let img = textured();
        for k in ToneKind::ALL {
            assert_eq!(adjust_tone(&img, k, 1.0).unwrap(), img);
        }
    }

    #[test]
    fn gamma_and_saturation() {
        let half = Image::constant(16, 16, 3, 0.5).unwrap();
        let g = adjust_tone(&half, ToneKind::Gamma, 2.0).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.25));
        let gray = adjust_tone(&textured(), ToneKind::Saturation, 0.0).unwrap();
        assert!(gray.data().chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));
        assert!(adjust_tone(&half, ToneKind::Gamma, 0.0).is_err());
        assert!("hue".parse::<ToneKind>().is_err());
        assert_eq!("contrast".parse::<ToneKind>().unwrap(), ToneKind::Contrast);
    }

    #[test]
    fn equalization_of_uniform_histogram() {
        let img = Image::from_fn(16, 16, 1, |y, x, _| (y * 16 + x) as f32 / 255.0).unwrap();
        let out = hist_equalize(&img);
        let worst = img.data().iter().zip(out.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(worst <= 1.0 / 255.0);
        let flat = Image::constant(16, 16, 3, 0.3).unwrap();
        assert_eq!(hist_equalize(&flat), flat);
    }

    #[test]
    fn equalization_is_monotone() {
        let img = textured();
        let out = hist_equalize(&img);
        for c in 0..3 {
            let (a, b) = (img.plane(c), out.plane(c));
            for i in 0..a.len() {
                for j in 0..a.len() {
                    if a[i] <= a[j] {
                        assert!(b[i] <= b[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn tone_curve_fixed_points() {
        let img = Image::from_fn(8, 8, 1, |y, _, _| [0.0, 0.5, 1.0, 0.5, 0.0, 1.0, 0.5, 0.0][y]).unwrap();
        let out = tone_curve(&img, 0.8).unwrap();
        assert!(img.data().iter().zip(out.data()).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!(tone_curve(&img, 1.0).is_err());
    }
}
