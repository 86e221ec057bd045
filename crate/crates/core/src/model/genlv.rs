use vpip_autograd::{Graph, Scalar, Tensor};

use super::config::ModelConfig;
use super::net::{self, Params};
use super::weights::{build_model, Weights};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::synth::filter::reflect;
use crate::synth::PromptPair;

pub const TILE_OVERLAP: usize = 16;
const TILE_BATCH: usize = 4;

/// Stacks RGB images into an `[N, 3, H, W]` tensor.
pub fn images_to_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| Error::ShapeMismatch("empty image batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        if img.height() != h || img.width() != w {
            return Err(Error::ShapeMismatch(format!(
                "batch mixes {h}x{w} and {}x{} images",
                img.height(),
                img.width()
            )));
        }
        data.extend(img.to_rgb().to_chw().into_iter().map(|v| T::from_f64_lossy(v as f64)));
    }
    Ok(Tensor::new(&[images.len(), 3, h, w], data))
}

pub fn tensor_to_images<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let (n, c, h, w) = t.dims4();
    t.data()
        .chunks(c * h * w)
        .take(n)
        .map(|chunk| {
            let chw: Vec<f32> = chunk.iter().map(|v| v.as_f64() as f32).collect();
            Image::from_chw(h, w, c, &chw)
        })
        .collect()
}

/// A configured network with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GenLv {
    pub config: ModelConfig,
    pub weights: Weights,
}

impl GenLv {
    pub fn new(config: ModelConfig, init_seed: u64) -> Result<Self> {
        let weights = build_model(&config, init_seed)?;
        Ok(Self { config, weights })
    }

    /// Batched forward pass; every image must be `image_size` square.
    pub fn forward_batch(&self, inputs: &[&Image], prompts: &[(&Image, &Image)]) -> Result<Vec<Image>> {
        if inputs.len() != prompts.len() {
            return Err(Error::ShapeMismatch(format!("{} inputs, {} prompts", inputs.len(), prompts.len())));
        }
        let g = Graph::<f32>::new();
        let p = Params::bind(&g, &self.weights, |_| false);
        let x = g.constant(images_to_tensor(inputs)?);
        let sources: Vec<&Image> = prompts.iter().map(|pp| pp.0).collect();
        let targets: Vec<&Image> = prompts.iter().map(|pp| pp.1).collect();
        let ps = g.constant(images_to_tensor(&sources)?);
        let pt = g.constant(images_to_tensor(&targets)?);
        let out = net::forward(&p, &self.config, x, ps, pt)?;
        tensor_to_images(&out.value())
    }

    /// `I_out = F(I_in, [P_S, P_T]; Θ)` for one model-sized input.
    pub fn forward_full(&self, input: &Image, prompt: &PromptPair) -> Result<Image> {
        let s = self.config.image_size;
        if input.height() != s || input.width() != s {
            return Err(Error::ShapeMismatch(format!(
                "input is {}x{}, model expects {s}x{s}",
                input.height(),
                input.width()
            )));
        }
        Ok(self.forward_batch(&[input], &[(&prompt.source, &prompt.target)])?.remove(0))
    }

    /// Inference at any size: prompts are resized to the model size, the
    /// input is processed in overlapping model-sized tiles averaged where
    /// they overlap (inputs smaller than a tile are reflect-padded).
    pub fn infer(&self, input: &Image, source: &Image, target: &Image) -> Result<Image> {
        let s = self.config.image_size;
        let fit = |img: &Image| -> Result<Image> {
            Ok(if img.height() == s && img.width() == s { img.to_rgb() } else { img.to_rgb().resize(s, s)? })
        };
        let (ps, pt) = (fit(source)?, fit(target)?);
        let input = input.to_rgb();
        let (h, w) = (input.height(), input.width());
        let padded = pad_reflect(&input, h.max(s), w.max(s));
        let (ph, pw) = (padded.height(), padded.width());
        let overlap = TILE_OVERLAP.min(s / 4);
        let ys = tile_starts(ph, s, overlap);
        let xs = tile_starts(pw, s, overlap);
        let origins: Vec<(usize, usize)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (y, x))).collect();
        let mut acc = vec![0f64; ph * pw * 3];
        let mut count = vec![0u32; ph * pw];
        for chunk in origins.chunks(TILE_BATCH) {
            let tiles = chunk.iter().map(|&(y, x)| padded.crop(y, x, s, s)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Image> = tiles.iter().collect();
            let prompts = vec![(&ps, &pt); tiles.len()];
            let outs = self.forward_batch(&refs, &prompts)?;
            for (&(y0, x0), out) in chunk.iter().zip(&outs) {
                for y in 0..s {
                    for x in 0..s {
                        let i = (y0 + y) * pw + x0 + x;
                        count[i] += 1;
                        for c in 0..3 {
                            acc[i * 3 + c] += out.get(y, x, c) as f64;
                        }
                    }
                }
            }
        }
        let mut data = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                let i = y * pw + x;
                for c in 0..3 {
                    data.push((acc[i * 3 + c] / count[i] as f64) as f32);
                }
            }
        }
        Image::new(h, w, 3, data)
    }
}

/// Tile origins covering `len` with tiles of `tile` overlapping by at least
/// `overlap`; the last tile is flush with the end.
pub fn tile_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    let stride = (tile - overlap).max(1);
    let mut starts = vec![0];
    while starts.last().unwrap() + tile < len {
        starts.push((starts.last().unwrap() + stride).min(len - tile));
    }
    starts
}

fn pad_reflect(img: &Image, h: usize, w: usize) -> Image {
    if h == img.height() && w == img.width() {
        return img.clone();
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h {
        let sy = reflect(y as isize, img.height());
        for x in 0..w {
            let sx = reflect(x as isize, img.width());
            for ch in 0..c {
                data.push(img.get(sy, sx, ch));
            }
        }
    }
    Image::new(h, w, c, data).expect("reflected pixels are valid")
}
