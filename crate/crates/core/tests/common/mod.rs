#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use rand::Rng;
use vpip::model::{build_model, net, ModelConfig, Weights};
use vpip::Image;
use vpip_autograd::gradcheck::check_gradients;
use vpip_autograd::{Graph, Tensor, Var};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn rand_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut r = vpip::seed::rng(seed);
    Image::new(h, w, c, (0..h * w * c).map(|_| r.gen::<f32>()).collect()).unwrap()
}

/// A smooth image with values inside [lo, hi].
pub fn smooth_image(h: usize, w: usize, seed: u64, lo: f32, hi: f32) -> Image {
    let mut r = vpip::seed::rng(seed);
    let (a, b, ph): (f32, f32, f32) = (r.gen_range(0.1..0.5), r.gen_range(0.1..0.5), r.gen_range(0.0..6.0));
    Image::from_fn(h, w, 3, |y, x, c| {
        let t = 0.5 + 0.5 * ((a * x as f32 + b * y as f32 + ph + c as f32).sin());
        lo + (hi - lo) * t
    })
    .unwrap()
}

pub fn rand_tensor(shape: &[usize], scale: f64, seed: u64) -> Tensor<f64> {
    let mut r = vpip::seed::rng(seed);
    Tensor::from_fn(shape, |_| r.gen_range(-scale..scale))
}

/// Two-level configuration small enough for finite differences.
pub fn grad_config() -> ModelConfig {
    ModelConfig {
        num_blocks: vec![1, 1],
        channels: vec![4, 8],
        heads: vec![1, 2],
        prompt_channels: 4,
        prompt_res_blocks: 1,
        window_size: 2,
        image_size: 4,
    }
}

/// Double-precision weights with every tensor (including zero-initialized
/// heads, biases and norm gains) randomly perturbed.
pub fn perturbed_weights(cfg: &ModelConfig, seed: u64) -> Weights<f64> {
    let mut w = build_model(cfg, seed).unwrap().cast::<f64>();
    let mut r = vpip::seed::rng(seed ^ 0xABCD);
    for (_, t) in w.iter_mut() {
        for v in t.data_mut() {
            *v += r.gen_range(-0.2..0.2);
        }
    }
    w
}

/// Fixed random projection so the loss is a generic scalar of the output.
pub fn probe<'g>(v: Var<'g, f64>, seed: u64) -> Var<'g, f64> {
    let r = rand_tensor(&v.shape(), 1.0, seed);
    v.mul(v.graph().constant(r)).sum()
}

/// Which block a gradient check exercises.
#[derive(Clone, Copy, Debug)]
pub enum Block {
    Tsab,
    Ssab,
    Pcab,
}

/// Largest relative error over the block input(s) and all of the block's
/// parameters, for a random instance of spatial size `side`.
pub fn block_grad_error(block: Block, side: usize, seed: u64) -> f64 {
    let cfg = grad_config();
    let weights = perturbed_weights(&cfg, seed);
    let (prefix, c, heads) = match block {
        Block::Tsab => ("backbone.enc0.0.tsab", 4, 1),
        Block::Ssab => ("backbone.enc0.0.ssab", 4, 1),
        Block::Pcab => ("backbone.latent.0.pcab", 8, 2),
    };
    let names: Vec<String> = weights.names().filter(|n| n.starts_with(prefix)).map(str::to_string).collect();
    assert!(!names.is_empty(), "no parameters under {prefix}");
    let n_feats = if matches!(block, Block::Pcab) { 3 } else { 1 };
    let mut inputs: Vec<Tensor<f64>> =
        (0..n_feats).map(|i| rand_tensor(&[1, c, side, side], 1.0, seed * 31 + i as u64)).collect();
    inputs.extend(names.iter().map(|n| weights.get(n).unwrap().clone()));
    let report = check_gradients(&inputs, 1e-5, 24, |g: &Graph<f64>, vs: &[Var<'_, f64>]| {
        let p = net::Params::from_vars(g, names.iter().cloned().zip(vs[n_feats..].iter().copied()));
        let out = match block {
            Block::Tsab => net::tsab_forward(&p, prefix, vs[0], heads),
            Block::Ssab => net::ssab_forward(&p, prefix, vs[0], heads, 2).unwrap(),
            Block::Pcab => net::pcab_forward(&p, prefix, vs[0], vs[1], vs[2], heads).unwrap(),
        };
        probe(out, seed + 7)
    });
    worst(&report)
}

/// Largest relative error, except that inputs with an identically zero
/// gradient (the key bias under softmax) are judged on the absolute
/// difference, which the relative form would divide by its 1e-8 floor.
fn worst(report: &[vpip_autograd::gradcheck::InputCheck]) -> f64 {
    report
        .iter()
        .map(|r| if r.analytic_norm < 1e-12 { r.rel_error * 1e-8 } else { r.rel_error })
        .fold(0.0, f64::max)
}

/// Largest relative error of the full two-level backbone (prompt features
/// included as inputs) over every parameter tensor.
pub fn backbone_grad_error(seed: u64) -> f64 {
    let cfg = grad_config();
    let weights = perturbed_weights(&cfg, seed);
    let names: Vec<String> = weights.names().filter(|n| n.starts_with("backbone.")).map(str::to_string).collect();
    let s = cfg.image_size;
    let lat = cfg.latent_size();
    let c = *cfg.channels.last().unwrap();
    let mut r = vpip::seed::rng(seed);
    let x = Tensor::from_fn(&[1, 3, s, s], |_| r.gen_range(0.3..0.7));
    let mut inputs = vec![x, rand_tensor(&[1, c, lat, lat], 1.0, seed + 1), rand_tensor(&[1, c, lat, lat], 1.0, seed + 2)];
    // The zero-initialized head is perturbed, so keep its scale small to stay clear of the output clamp.
    for n in &names {
        let mut t = weights.get(n).unwrap().clone();
        if n.starts_with("backbone.head") {
            t = t.map(|v| v * 0.05);
        }
        inputs.push(t);
    }
    let report = check_gradients(&inputs, 1e-5, 8, |g: &Graph<f64>, vs: &[Var<'_, f64>]| {
        let p = net::Params::from_vars(g, names.iter().cloned().zip(vs[3..].iter().copied()));
        let out = net::backbone_forward(&p, &cfg, vs[0], vs[1], vs[2]).unwrap();
        probe(out, seed + 11)
    });
    worst(&report)
}
