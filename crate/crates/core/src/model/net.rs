use std::collections::BTreeMap;

use vpip_autograd::{Graph, Scalar, Var};

use super::config::ModelConfig;
use super::weights::{Init, ParamSpec, SpecList, Weights};
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-5;
const L2_EPS: f64 = 1e-12;

/// Weights bound as leaves of one graph.
pub struct Params<'g, T: Scalar> {
    graph: &'g Graph<T>,
    vars: BTreeMap<String, Var<'g, T>>,
}

impl<'g, T: Scalar> Params<'g, T> {
    /// Binds every weight; those accepted by `trainable` become gradient
    /// leaves, the rest constants.
    pub fn bind(graph: &'g Graph<T>, weights: &Weights<T>, trainable: impl Fn(&str) -> bool) -> Self {
        let vars = weights
            .iter()
            .map(|(name, t)| {
                let v = if trainable(name) { graph.param(t.clone()) } else { graph.constant(t.clone()) };
                (name.to_string(), v)
            })
            .collect();
        Self { graph, vars }
    }

    /// Wraps variables that already live on `graph`.
    pub fn from_vars(graph: &'g Graph<T>, vars: impl IntoIterator<Item = (String, Var<'g, T>)>) -> Self {
        Self { graph, vars: vars.into_iter().collect() }
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn var(&self, name: &str) -> Var<'g, T> {
        *self.vars.get(name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    pub fn get(&self, name: &str) -> Option<Var<'g, T>> {
        self.vars.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var<'g, T>)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn conv(&self, prefix: &str, x: Var<'g, T>, stride: usize, pad: usize) -> Var<'g, T> {
        x.conv2d(self.var(&format!("{prefix}.weight")), self.get(&format!("{prefix}.bias")), stride, pad)
    }

    fn pointwise(&self, prefix: &str, x: Var<'g, T>) -> Var<'g, T> {
        self.conv(prefix, x, 1, 0)
    }

    fn depthwise(&self, prefix: &str, x: Var<'g, T>) -> Var<'g, T> {
        x.depthwise_conv2d(self.var(&format!("{prefix}.weight")), self.get(&format!("{prefix}.bias")))
    }

    fn norm(&self, prefix: &str, x: Var<'g, T>) -> Var<'g, T> {
        x.layer_norm_channels(
            self.var(&format!("{prefix}.weight")),
            self.var(&format!("{prefix}.bias")),
            T::from_f64_lossy(NORM_EPS),
        )
    }
}

fn dims<T: Scalar>(x: Var<'_, T>) -> (usize, usize, usize, usize) {
    x.value().dims4()
}

/// Output and row-stochastic attention matrix of one attention core.
pub struct Attention<'g, T: Scalar> {
    pub out: Var<'g, T>,
    pub probs: Var<'g, T>,
}

/// Channel ("transposed") attention: per head, a `d×d` map between
/// L2-normalized query and key rows scaled by a learned temperature.
/// `q, k, v`: `[N, C, H, W]`, `temperature`: `[heads]`.
pub fn transposed_attention<'g, T: Scalar>(
    q: Var<'g, T>,
    k: Var<'g, T>,
    v: Var<'g, T>,
    temperature: Var<'g, T>,
    heads: usize,
) -> Attention<'g, T> {
    let (n, c, h, w) = dims(q);
    let d = c / heads;
    let tokens = |x: Var<'g, T>| x.reshape(&[n * heads, d, h * w]);
    let eps = T::from_f64_lossy(L2_EPS);
    let (q, k, v) = (tokens(q).l2_normalize_last(eps), tokens(k).l2_normalize_last(eps), tokens(v));
    let logits = q.bmm(k, false, true).reshape(&[n, heads, d * d]).mul_channel(temperature).reshape(&[n * heads, d, d]);
    let probs = logits.softmax_last();
    let out = probs.bmm(v, false, false).reshape(&[n, c, h, w]);
    Attention { out, probs }
}

/// Multi-head scaled dot-product attention inside non-overlapping
/// `window×window` tiles.
pub fn window_attention<'g, T: Scalar>(
    q: Var<'g, T>,
    k: Var<'g, T>,
    v: Var<'g, T>,
    heads: usize,
    window: usize,
) -> Result<Attention<'g, T>> {
    let (n, c, h, w) = dims(q);
    if window == 0 || h % window != 0 || w % window != 0 {
        return Err(Error::ShapeMismatch(format!("window {window} does not tile a {h}x{w} feature")));
    }
    let d = c / heads;
    let (wy, wx) = (h / window, w / window);
    let t = window * window;
    let part = |x: Var<'g, T>| {
        x.reshape(&[n, heads, d, wy, window, wx, window])
            .permute(&[0, 3, 5, 1, 4, 6, 2])
            .reshape(&[n * wy * wx * heads, t, d])
    };
    let scale = T::from_f64_lossy(1.0 / (d as f64).sqrt());
    let probs = part(q).bmm(part(k), false, true).scale(scale).softmax_last();
    let out = probs
        .bmm(part(v), false, false)
        .reshape(&[n, wy, wx, heads, window, window, d])
        .permute(&[0, 3, 6, 1, 4, 2, 5])
        .reshape(&[n, c, h, w]);
    Ok(Attention { out, probs })
}

/// Multi-head scaled dot-product attention whose tokens are spatial
/// positions; queries from `q`, keys from `k`, values from `v`.
pub fn cross_attention<'g, T: Scalar>(q: Var<'g, T>, k: Var<'g, T>, v: Var<'g, T>, heads: usize) -> Attention<'g, T> {
    let (n, c, h, w) = dims(q);
    let (_, _, hk, wk) = dims(k);
    let d = c / heads;
    let scale = T::from_f64_lossy(1.0 / (d as f64).sqrt());
    let q = q.reshape(&[n * heads, d, h * w]);
    let k = k.reshape(&[n * heads, d, hk * wk]);
    let v = v.reshape(&[n * heads, d, hk * wk]);
    let probs = q.bmm(k, true, false).scale(scale).softmax_last();
    let out = v.bmm(probs, false, true).reshape(&[n, c, h, w]);
    Attention { out, probs }
}

/// Gated depthwise feed-forward with expansion 2.
pub fn ffn<'g, T: Scalar>(p: &Params<'g, T>, prefix: &str, x: Var<'g, T>) -> Var<'g, T> {
    let hdn = p.pointwise(&format!("{prefix}.project_in"), x);
    let hdn = p.depthwise(&format!("{prefix}.dwconv"), hdn);
    let parts = hdn.chunk(2, 1);
    p.pointwise(&format!("{prefix}.project_out"), parts[0].gelu().mul(parts[1]))
}

fn with_ffn<'g, T: Scalar>(p: &Params<'g, T>, prefix: &str, z: Var<'g, T>, update: Var<'g, T>) -> Var<'g, T> {
    let z = z.add(update);
    z.add(ffn(p, &format!("{prefix}.ffn"), p.norm(&format!("{prefix}.norm2"), z)))
}

/// Attention branch of a TSAB, before the residual add.
pub fn tsab_update<'g, T: Scalar>(p: &Params<'g, T>, prefix: &str, z: Var<'g, T>, heads: usize) -> Attention<'g, T> {
    let x = p.norm(&format!("{prefix}.norm1"), z);
    let qkv = p.depthwise(&format!("{prefix}.qkv_dw"), p.pointwise(&format!("{prefix}.qkv"), x));
    let qkv = qkv.chunk(3, 1);
    let a = transposed_attention(qkv[0], qkv[1], qkv[2], p.var(&format!("{prefix}.temperature")), heads);
    Attention { out: p.pointwise(&format!("{prefix}.proj"), a.out), probs: a.probs }
}

pub fn tsab_forward<'g, T: Scalar>(p: &Params<'g, T>, prefix: &str, z: Var<'g, T>, heads: usize) -> Var<'g, T> {
    let u = tsab_update(p, prefix, z, heads).out;
    with_ffn(p, prefix, z, u)
}

pub fn ssab_update<'g, T: Scalar>(
    p: &Params<'g, T>,
    prefix: &str,
    z: Var<'g, T>,
    heads: usize,
    window: usize,
) -> Result<Attention<'g, T>> {
    let x = p.norm(&format!("{prefix}.norm1"), z);
    let qkv = p.pointwise(&format!("{prefix}.qkv"), x).chunk(3, 1);
    let a = window_attention(qkv[0], qkv[1], qkv[2], heads, window)?;
    Ok(Attention { out: p.pointwise(&format!("{prefix}.proj"), a.out), probs: a.probs })
}

pub fn ssab_forward<'g, T: Scalar>(
    p: &Params<'g, T>,
    prefix: &str,
    z: Var<'g, T>,
    heads: usize,
    window: usize,
) -> Result<Var<'g, T>> {
    let u = ssab_update(p, prefix, z, heads, window)?.out;
    Ok(with_ffn(p, prefix, z, u))
}

pub fn pcab_update<'g, T: Scalar>(
    p: &Params<'g, T>,
    prefix: &str,
    z: Var<'g, T>,
    z_s: Var<'g, T>,
    z_t: Var<'g, T>,
    heads: usize,
) -> Result<Attention<'g, T>> {
    let (sz, ss, st) = (z.shape(), z_s.shape(), z_t.shape());
    if ss != st || ss.len() != 4 || ss[0] != sz[0] || ss[1] != sz[1] {
        return Err(Error::ShapeMismatch(format!("prompt features {ss:?} / {st:?} for latent {sz:?}")));
    }
    let kv_norm = format!("{prefix}.norm_kv");
    let q = p.pointwise(&format!("{prefix}.q"), p.norm(&format!("{prefix}.norm1"), z));
    let k = p.pointwise(&format!("{prefix}.k"), p.norm(&kv_norm, z_s));
    let v = p.pointwise(&format!("{prefix}.v"), p.norm(&kv_norm, z_t));
    let a = cross_attention(q, k, v, heads);
    Ok(Attention { out: p.pointwise(&format!("{prefix}.proj"), a.out), probs: a.probs })
}

pub fn pcab_forward<'g, T: Scalar>(
    p: &Params<'g, T>,
    prefix: &str,
    z: Var<'g, T>,
    z_s: Var<'g, T>,
    z_t: Var<'g, T>,
    heads: usize,
) -> Result<Var<'g, T>> {
    let u = pcab_update(p, prefix, z, z_s, z_t, heads)?.out;
    Ok(with_ffn(p, prefix, z, u))
}

/// Encodes both prompt images with shared weights in one batched pass.
/// `p_s`, `p_t`: `[N, 3, S, S]` with `S = image_size`.
pub fn prompt_encode<'g, T: Scalar>(
    p: &Params<'g, T>,
    cfg: &ModelConfig,
    p_s: Var<'g, T>,
    p_t: Var<'g, T>,
) -> Result<(Var<'g, T>, Var<'g, T>)> {
    let (ss, st) = (p_s.shape(), p_t.shape());
    let s = cfg.image_size;
    if ss != st || ss.len() != 4 || ss[1] != 3 || ss[2] != s || ss[3] != s {
        return Err(Error::ShapeMismatch(format!("prompts {ss:?} / {st:?}, expected [N, 3, {s}, {s}]")));
    }
    let n = ss[0];
    let mut x = p.conv("prompt_encoder.stem", Var::concat(&[p_s, p_t], 0), 1, 1).gelu();
    for j in 0..cfg.bottleneck() {
        x = p.conv(&format!("prompt_encoder.down{j}"), x, 2, 1);
        for r in 0..cfg.prompt_res_blocks {
            let pre = format!("prompt_encoder.level{j}.res{r}");
            let y = p.conv(&format!("{pre}.conv1"), x, 1, 1).gelu();
            x = x.add(p.conv(&format!("{pre}.conv2"), y, 1, 1));
        }
    }
    let z = p.pointwise("prompt_encoder.out", x);
    Ok((z.narrow(0, 0, n), z.narrow(0, n, n)))
}

fn enc_prefix(kind: &str, level: usize, block: usize) -> String {
    format!("backbone.{kind}{level}.{block}")
}

/// U-shaped backbone. `x`: `[N, 3, H, W]` in `[0, 1]`; `z_s`, `z_t`: prompt
/// latents. Returns `clamp(x + head(...))`.
pub fn backbone_forward<'g, T: Scalar>(
    p: &Params<'g, T>,
    cfg: &ModelConfig,
    x: Var<'g, T>,
    z_s: Var<'g, T>,
    z_t: Var<'g, T>,
) -> Result<Var<'g, T>> {
    backbone_forward_traced(p, cfg, x, z_s, z_t, &mut |_, _| {})
}

/// [`backbone_forward`] reporting the shape after every stage.
pub fn backbone_forward_traced<'g, T: Scalar>(
    p: &Params<'g, T>,
    cfg: &ModelConfig,
    x: Var<'g, T>,
    z_s: Var<'g, T>,
    z_t: Var<'g, T>,
    trace: &mut dyn FnMut(&str, &[usize]),
) -> Result<Var<'g, T>> {
    let (_, c, h, w) = dims(x);
    let r = cfg.reduction();
    if c != 3 || h % r != 0 || w % r != 0 {
        return Err(Error::ShapeMismatch(format!("input {:?}: need 3 channels and sides divisible by {r}", x.shape())));
    }
    let levels = cfg.bottleneck();
    let mut z = p.conv("backbone.stem", x, 1, 1);
    let mut skips = Vec::with_capacity(levels);
    for i in 0..levels {
        for b in 0..cfg.num_blocks[i] {
            let pre = enc_prefix("enc", i, b);
            z = tsab_forward(p, &format!("{pre}.tsab"), z, cfg.heads[i]);
            z = ssab_forward(p, &format!("{pre}.ssab"), z, cfg.heads[i], cfg.window_size)?;
        }
        trace(&format!("enc{i}"), &z.shape());
        skips.push(z);
        z = p.conv(&format!("backbone.down{i}"), z, 2, 1);
    }
    let hb = cfg.heads[levels];
    for b in 0..cfg.num_blocks[levels] {
        let pre = format!("backbone.latent.{b}");
        z = tsab_forward(p, &format!("{pre}.tsab"), z, hb);
        z = pcab_forward(p, &format!("{pre}.pcab"), z, z_s, z_t, hb)?;
    }
    trace("latent", &z.shape());
    for i in (0..levels).rev() {
        z = p.pointwise(&format!("backbone.up{i}"), z).pixel_shuffle(2);
        z = p.pointwise(&format!("backbone.reduce{i}"), Var::concat(&[z, skips[i]], 1));
        for b in 0..cfg.num_blocks[i] {
            let pre = enc_prefix("dec", i, b);
            z = tsab_forward(p, &format!("{pre}.tsab"), z, cfg.heads[i]);
            z = ssab_forward(p, &format!("{pre}.ssab"), z, cfg.heads[i], cfg.window_size)?;
        }
        trace(&format!("dec{i}"), &z.shape());
    }
    let residual = p.conv("backbone.head", z, 1, 1);
    Ok(x.add(residual).clamp(T::zero(), T::one()))
}

/// Prompt encoder followed by the backbone.
pub fn forward<'g, T: Scalar>(
    p: &Params<'g, T>,
    cfg: &ModelConfig,
    x: Var<'g, T>,
    p_s: Var<'g, T>,
    p_t: Var<'g, T>,
) -> Result<Var<'g, T>> {
    let (z_s, z_t) = prompt_encode(p, cfg, p_s, p_t)?;
    backbone_forward(p, cfg, x, z_s, z_t)
}

pub(crate) fn tsab_specs(s: &mut SpecList, prefix: &str, c: usize, heads: usize) {
    s.norm(&format!("{prefix}.norm1"), c);
    s.proj(&format!("{prefix}.qkv"), 3 * c, c);
    s.depthwise(&format!("{prefix}.qkv_dw"), 3 * c);
    s.tensor(format!("{prefix}.temperature"), &[heads], Init::Ones);
    s.proj(&format!("{prefix}.proj"), c, c);
    ffn_specs(s, prefix, c);
}

pub(crate) fn ssab_specs(s: &mut SpecList, prefix: &str, c: usize) {
    s.norm(&format!("{prefix}.norm1"), c);
    s.proj(&format!("{prefix}.qkv"), 3 * c, c);
    s.proj(&format!("{prefix}.proj"), c, c);
    ffn_specs(s, prefix, c);
}

pub(crate) fn pcab_specs(s: &mut SpecList, prefix: &str, c: usize) {
    s.norm(&format!("{prefix}.norm1"), c);
    s.norm(&format!("{prefix}.norm_kv"), c);
    for proj in ["q", "k", "v", "proj"] {
        s.conv(&format!("{prefix}.{proj}"), c, c, 1);
    }
    ffn_specs(s, prefix, c);
}

fn ffn_specs(s: &mut SpecList, prefix: &str, c: usize) {
    s.norm(&format!("{prefix}.norm2"), c);
    s.proj(&format!("{prefix}.ffn.project_in"), 4 * c, c);
    s.depthwise(&format!("{prefix}.ffn.dwconv"), 4 * c);
    s.proj(&format!("{prefix}.ffn.project_out"), c, 2 * c);
}

/// Every parameter of the network, in definition order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut s = SpecList::default();
    let pc = cfg.prompt_channels;
    let levels = cfg.bottleneck();
    s.conv("prompt_encoder.stem", pc, 3, 3);
    for j in 0..levels {
        let (cin, cout) = (pc << j, pc << (j + 1));
        s.conv(&format!("prompt_encoder.down{j}"), cout, cin, 3);
        for r in 0..cfg.prompt_res_blocks {
            let pre = format!("prompt_encoder.level{j}.res{r}");
            s.conv(&format!("{pre}.conv1"), cout, cout, 3);
            s.conv(&format!("{pre}.conv2"), cout, cout, 3);
        }
    }
    s.conv("prompt_encoder.out", cfg.channels[levels], pc << levels, 1);
    let ch = &cfg.channels;
    s.conv("backbone.stem", ch[0], 3, 3);
    for i in 0..levels {
        for b in 0..cfg.num_blocks[i] {
            let pre = enc_prefix("enc", i, b);
            tsab_specs(&mut s, &format!("{pre}.tsab"), ch[i], cfg.heads[i]);
            ssab_specs(&mut s, &format!("{pre}.ssab"), ch[i]);
        }
        s.conv(&format!("backbone.down{i}"), ch[i + 1], ch[i], 3);
    }
    for b in 0..cfg.num_blocks[levels] {
        let pre = format!("backbone.latent.{b}");
        tsab_specs(&mut s, &format!("{pre}.tsab"), ch[levels], cfg.heads[levels]);
        pcab_specs(&mut s, &format!("{pre}.pcab"), ch[levels]);
    }
    for i in (0..levels).rev() {
        s.conv(&format!("backbone.up{i}"), 4 * ch[i], ch[i + 1], 1);
        s.conv(&format!("backbone.reduce{i}"), ch[i], 2 * ch[i], 1);
        for b in 0..cfg.num_blocks[i] {
            let pre = enc_prefix("dec", i, b);
            tsab_specs(&mut s, &format!("{pre}.tsab"), ch[i], cfg.heads[i]);
            ssab_specs(&mut s, &format!("{pre}.ssab"), ch[i]);
        }
    }
    s.zero_conv("backbone.head", 3, ch[0], 3);
    s.0
}
