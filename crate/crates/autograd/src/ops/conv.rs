use crate::{gemm, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug)]
struct Geom {
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn im2col<T: Scalar>(x: &[T], g: &Geom, cols: &mut [T]) {
    let (k, s, p) = (g.k, g.stride as isize, g.pad as isize);
    let plane = g.ho * g.wo;
    for ci in 0..g.cin {
        let xc = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * plane;
                let dst = &mut cols[row..row + plane];
                for oy in 0..g.ho {
                    let iy = oy as isize * s - p + ky as isize;
                    let drow = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        drow.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let xrow = &xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = ox as isize * s - p + kx as isize;
                        *d = if ix < 0 || ix >= g.w as isize { T::zero() } else { xrow[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &Geom, dx: &mut [T]) {
    let (k, s, p) = (g.k, g.stride as isize, g.pad as isize);
    let plane = g.ho * g.wo;
    for ci in 0..g.cin {
        let dxc = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * plane;
                let src = &cols[row..row + plane];
                for oy in 0..g.ho {
                    let iy = oy as isize * s - p + ky as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = iy as usize * g.w;
                    for ox in 0..g.wo {
                        let ix = ox as isize * s - p + kx as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dxc[base + ix as usize] = dxc[base + ix as usize] + src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    /// Dense 2-D convolution (cross-correlation) with zero padding.
    ///
    /// `self`: `[N, Cin, H, W]`, `weight`: `[Cout, Cin, k, k]`, `bias`: `[Cout]`.
    pub fn conv2d(self, weight: Self, bias: Option<Self>, stride: usize, pad: usize) -> Self {
        self.same_graph(&weight);
        let (x, wt) = (self.value(), weight.value());
        let (n, cin, h, w) = x.dims4();
        let (cout, wcin, k, k2) = wt.dims4();
        assert_eq!(k, k2, "square kernels only");
        assert_eq!(cin, wcin, "conv2d: input has {cin} channels, weight expects {wcin}");
        assert!(h + 2 * pad >= k && w + 2 * pad >= k, "conv2d: kernel larger than padded input");
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let geom = Geom { cin, h, w, k, stride, pad, ho, wo };
        let kk = cin * k * k;
        let plane = ho * wo;
        let mut out = vec![T::zero(); n * cout * plane];
        let mut cols = if geom.pointwise() { Vec::new() } else { vec![T::zero(); kk * plane] };
        for i in 0..n {
            let xi = &x.data()[i * cin * h * w..(i + 1) * cin * h * w];
            let src: &[T] = if geom.pointwise() {
                xi
            } else {
                im2col(xi, &geom, &mut cols);
                &cols
            };
            gemm(false, false, cout, plane, kk, T::one(), wt.data(), src, T::zero(), &mut out[i * cout * plane..(i + 1) * cout * plane]);
        }
        let mut out = Tensor::new(&[n, cout, ho, wo], out);
        let bias_val = bias.map(|b| {
            self.same_graph(&b);
            b.value()
        });
        if let Some(b) = &bias_val {
            assert_eq!(b.numel(), cout, "conv2d bias size");
            for (j, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
                let bv = b.data()[j % cout];
                chunk.iter_mut().for_each(|v| *v = *v + bv);
            }
        }
        let (ix, iw) = (self.id, weight.id);
        let ib = bias.map(|b| b.id);
        let mut parents = vec![ix, iw];
        parents.extend(ib);
        self.graph.record(out, &parents, move |g, sink| {
            let gd = g.data();
            if let Some(ib) = ib {
                if sink.wants(ib) {
                    let mut db = vec![T::zero(); cout];
                    for (j, chunk) in gd.chunks(plane).enumerate() {
                        db[j % cout] = db[j % cout] + chunk.iter().copied().sum();
                    }
                    sink.accumulate(ib, Tensor::new(&[cout], db));
                }
            }
            let want_w = sink.wants(iw);
            let want_x = sink.wants(ix);
            let mut dw = vec![T::zero(); cout * kk];
            let mut dx = if want_x { vec![T::zero(); x.numel()] } else { Vec::new() };
            let mut cols = if geom.pointwise() { Vec::new() } else { vec![T::zero(); kk * plane] };
            let mut dcols = if geom.pointwise() || !want_x { Vec::new() } else { vec![T::zero(); kk * plane] };
            for i in 0..n {
                let gi = &gd[i * cout * plane..(i + 1) * cout * plane];
                if want_w {
                    let xi = &x.data()[i * cin * h * w..(i + 1) * cin * h * w];
                    let src: &[T] = if geom.pointwise() {
                        xi
                    } else {
                        im2col(xi, &geom, &mut cols);
                        &cols
                    };
                    gemm(false, true, cout, kk, plane, T::one(), gi, src, T::one(), &mut dw);
                }
                if want_x {
                    let dxi = &mut dx[i * cin * h * w..(i + 1) * cin * h * w];
                    if geom.pointwise() {
                        gemm(true, false, kk, plane, cout, T::one(), wt.data(), gi, T::zero(), dxi);
                    } else {
                        gemm(true, false, kk, plane, cout, T::one(), wt.data(), gi, T::zero(), &mut dcols);
                        col2im(&dcols, &geom, dxi);
                    }
                }
            }
            if want_w {
                sink.accumulate(iw, Tensor::new(wt.shape(), dw));
            }
            if want_x {
                sink.accumulate(ix, Tensor::new(x.shape(), dx));
            }
        })
    }

    /// Depthwise (one filter per channel) stride-1 convolution, zero padding
    /// `k / 2`. `weight`: `[C, 1, k, k]`.
    pub fn depthwise_conv2d(self, weight: Self, bias: Option<Self>) -> Self {
        self.same_graph(&weight);
        let (x, wt) = (self.value(), weight.value());
        let (n, c, h, w) = x.dims4();
        let (wc, one, k, k2) = wt.dims4();
        assert!(wc == c && one == 1 && k == k2 && k % 2 == 1, "depthwise weight {:?} for {c} channels", wt.shape());
        let p = k / 2;
        let plane = h * w;
        let mut out = vec![T::zero(); x.numel()];
        for (j, (oc, xc)) in out.chunks_mut(plane).zip(x.data().chunks(plane)).enumerate() {
            let ch = j % c;
            let kern = &wt.data()[ch * k * k..(ch + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    for_tap(h, w, ky, kx, p, |oy, ox0, iy, ix0, len| {
                        let orow = &mut oc[oy * w + ox0..oy * w + ox0 + len];
                        let irow = &xc[iy * w + ix0..iy * w + ix0 + len];
                        for (o, &i) in orow.iter_mut().zip(irow) {
                            *o = *o + wv * i;
                        }
                    });
                }
            }
        }
        let mut out = Tensor::new(x.shape(), out);
        let bias_val = bias.map(|b| b.value());
        if let Some(b) = &bias_val {
            for (j, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
                let bv = b.data()[j % c];
                chunk.iter_mut().for_each(|v| *v = *v + bv);
            }
        }
        let (ix, iw) = (self.id, weight.id);
        let ib = bias.map(|b| b.id);
        let mut parents = vec![ix, iw];
        parents.extend(ib);
        let _ = n;
        self.graph.record(out, &parents, move |g, sink| {
            if let Some(ib) = ib {
                if sink.wants(ib) {
                    let mut db = vec![T::zero(); c];
                    for (j, chunk) in g.data().chunks(plane).enumerate() {
                        db[j % c] = db[j % c] + chunk.iter().copied().sum();
                    }
                    sink.accumulate(ib, Tensor::new(&[c], db));
                }
            }
            let want_w = sink.wants(iw);
            let want_x = sink.wants(ix);
            let mut dw = vec![T::zero(); c * k * k];
            let mut dx = if want_x { vec![T::zero(); x.numel()] } else { Vec::new() };
            for (j, (gc, xc)) in g.data().chunks(plane).zip(x.data().chunks(plane)).enumerate() {
                let ch = j % c;
                for ky in 0..k {
                    for kx in 0..k {
                        let t = ch * k * k + ky * k + kx;
                        let wv = wt.data()[t];
                        let mut acc = T::zero();
                        for_tap(h, w, ky, kx, p, |oy, ox0, iy, ix0, len| {
                            let grow = &gc[oy * w + ox0..oy * w + ox0 + len];
                            if want_w {
                                let irow = &xc[iy * w + ix0..iy * w + ix0 + len];
                                acc = acc + grow.iter().zip(irow).map(|(&a, &b)| a * b).sum::<T>();
                            }
                            if want_x {
                                let base = j * plane + iy * w + ix0;
                                for (d, &gv) in dx[base..base + len].iter_mut().zip(grow) {
                                    *d = *d + wv * gv;
                                }
                            }
                        });
                        dw[t] = dw[t] + acc;
                    }
                }
            }
            if want_w {
                sink.accumulate(iw, Tensor::new(wt.shape(), dw));
            }
            if want_x {
                sink.accumulate(ix, Tensor::new(x.shape(), dx));
            }
        })
    }
}

/// Visits the valid output row segments of one kernel tap: output
/// `(oy, ox0..ox0+len)` reads input `(iy, ix0..ix0+len)`.
#[inline]
fn for_tap(h: usize, w: usize, ky: usize, kx: usize, p: usize, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
    // input = output + k - p
    let oy_lo = p.saturating_sub(ky);
    let oy_hi = (h + p).saturating_sub(ky).min(h);
    let ox_lo = p.saturating_sub(kx);
    let ox_hi = (w + p).saturating_sub(kx).min(w);
    if ox_lo >= ox_hi {
        return;
    }
    let len = ox_hi - ox_lo;
    for oy in oy_lo..oy_hi {
        let iy = oy + ky - p;
        let ix0 = ox_lo + kx - p;
        f(oy, ox_lo, iy, ix0, len);
    }
}
