use std::path::{Path, PathBuf};

use crate::error::{io_err, Error, Result};

/// Smallest accepted height or width.
pub const MIN_SIDE: usize = 8;

/// ITU-R BT.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Floating-point raster, `H×W×C` interleaved, `C ∈ {1, 3}`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "{height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, channels, data })
    }

    /// Builds from unconstrained values, clamping into `[0, 1]`.
    ///
    /// Panics on non-finite input: operators must never produce NaN.
    pub(crate) fn clamped(height: usize, width: usize, channels: usize, mut data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * channels);
        for v in &mut data {
            assert!(v.is_finite(), "operator produced a non-finite value");
            *v = v.clamp(0.0, 1.0);
        }
        Self { height, width, channels, data }
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// One channel as a row-major `H×W` plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).map(|&v| v as f64).collect()
    }

    /// Reassembles planes produced by [`Image::plane`], clamping.
    pub(crate) fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Self {
        let channels = planes.len();
        let mut data = vec![0f32; height * width * channels];
        for (c, p) in planes.iter().enumerate() {
            for (i, &v) in p.iter().enumerate() {
                data[i * channels + c] = v as f32;
            }
        }
        Self::clamped(height, width, channels, data)
    }

    /// BT.601 luma plane; the identity for single-channel images.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.plane(0);
        }
        self.data
            .chunks(3)
            .map(|p| LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64)
            .collect()
    }

    /// Replicates a single plane into `channels` identical channels.
    pub(crate) fn gray(height: usize, width: usize, plane: &[f64], channels: usize) -> Self {
        let planes = vec![plane.to_vec(); channels];
        Self::from_planes(height, width, &planes)
    }

    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image { height: self.height, width: self.width, channels: 3, data }
    }

    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Image> {
        if y0 + height > self.height || x0 + width > self.width {
            return Err(Error::InvalidImage(format!(
                "crop {height}x{width}@({y0},{x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        check_dims(height, width, self.channels)?;
        let c = self.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for y in y0..y0 + height {
            let row = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[row..row + width * c]);
        }
        Ok(Image { height, width, channels: c, data })
    }

    /// Bilinear resampling with half-pixel centres.
    pub fn resize(&self, height: usize, width: usize) -> Result<Image> {
        check_dims(height, width, self.channels)?;
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let c = self.channels;
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let mut data = Vec::with_capacity(height * width * c);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                for ch in 0..c {
                    let a = self.get(y0, x0, ch) as f64 * (1.0 - wx) + self.get(y0, x1, ch) as f64 * wx;
                    let b = self.get(y1, x0, ch) as f64 * (1.0 - wx) + self.get(y1, x1, ch) as f64 * wx;
                    data.push((a * (1.0 - wy) + b * wy) as f32);
                }
            }
        }
        Ok(Image::clamped(height, width, c, data))
    }

    /// Rounds every value to the nearest 8-bit level, `round(v·255)/255`.
    pub fn quantized(&self) -> Image {
        let data = self.data.iter().map(|&v| to_u8(v) as f32 / 255.0).collect();
        Image { height: self.height, width: self.width, channels: self.channels, data }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(height, width, channels, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// Loads any PNG as 8-bit RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let img = image::load_from_memory(&bytes)
            .map_err(|source| Error::Codec { path: path.to_path_buf(), source })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Image::from_u8(h as usize, w as usize, 3, img.as_raw())
    }

    /// Writes an 8-bit PNG (RGB or grayscale).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        image::save_buffer_with_format(
            path,
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Codec { path: path.to_path_buf(), source })
    }

    /// Encodes as an in-memory 8-bit PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        use image::ImageEncoder;
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.to_u8(), self.width as u32, self.height as u32, color)
            .map_err(|source| Error::Codec { path: PathBuf::from("<memory>"), source })?;
        Ok(out)
    }

    /// Like [`Image::save`], but never leaves a partial file behind.
    pub fn save_atomic(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::fsutil::write_atomic(path.as_ref(), &self.encode_png()?)
    }

    /// Channel-major copy, `C×H×W`.
    pub fn to_chw(&self) -> Vec<f32> {
        let c = self.channels;
        let n = self.height * self.width;
        let mut out = vec![0f32; self.data.len()];
        for (i, px) in self.data.chunks(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                out[ch * n + i] = v;
            }
        }
        out
    }

    /// Inverse of [`Image::to_chw`]; clamps into `[0, 1]`.
    pub fn from_chw(height: usize, width: usize, channels: usize, chw: &[f32]) -> Result<Image> {
        check_dims(height, width, channels)?;
        let n = height * width;
        if chw.len() != n * channels {
            return Err(Error::InvalidImage("CHW buffer size".into()));
        }
        if chw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite value in model output".into()));
        }
        let mut data = vec![0f32; chw.len()];
        for ch in 0..channels {
            for i in 0..n {
                data[i * channels + ch] = chw[ch * n + i];
            }
        }
        Ok(Image::clamped(height, width, channels, data))
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::InvalidImage(format!("{height}x{width} is below the {MIN_SIDE}px minimum")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidImage(format!("{channels} channels; expected 1 or 3")));
    }
    Ok(())
}
