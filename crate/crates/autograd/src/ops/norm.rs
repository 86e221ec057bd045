use crate::{Scalar, Tensor, Var};

impl<'g, T: Scalar> Var<'g, T> {
    /// Layer normalization across the channel axis of `[N, C, ...]`,
    /// independently at every spatial position, with per-channel affine.
    pub fn layer_norm_channels(self, gamma: Self, beta: Self, eps: T) -> Self {
        self.same_graph(&gamma);
        self.same_graph(&beta);
        let (x, gv, bv) = (self.value(), gamma.value(), beta.value());
        let (n, c, l) = x.ncl();
        assert!(gv.numel() == c && bv.numel() == c, "layer norm affine size");
        let cf = T::from_usize(c).unwrap();
        let mut xhat = vec![T::zero(); x.numel()];
        let mut rstd = vec![T::zero(); n * l];
        let mut mean = vec![T::zero(); l];
        let mut var = vec![T::zero(); l];
        for i in 0..n {
            let xs = &x.data()[i * c * l..(i + 1) * c * l];
            mean.iter_mut().for_each(|v| *v = T::zero());
            var.iter_mut().for_each(|v| *v = T::zero());
            for row in xs.chunks(l) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m = *m + v;
                }
            }
            mean.iter_mut().for_each(|m| *m = *m / cf);
            for row in xs.chunks(l) {
                for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                    *s = *s + (v - m) * (v - m);
                }
            }
            let rs = &mut rstd[i * l..(i + 1) * l];
            for (r, &s) in rs.iter_mut().zip(&var) {
                *r = T::one() / (s / cf + eps).sqrt();
            }
            let xh = &mut xhat[i * c * l..(i + 1) * c * l];
            for (orow, row) in xh.chunks_mut(l).zip(xs.chunks(l)) {
                for (((o, &v), &m), &r) in orow.iter_mut().zip(row).zip(&mean).zip(rs.iter()) {
                    *o = (v - m) * r;
                }
            }
        }
        let mut out = xhat.clone();
        for (j, row) in out.chunks_mut(l).enumerate() {
            let (gm, bt) = (gv.data()[j % c], bv.data()[j % c]);
            row.iter_mut().for_each(|v| *v = *v * gm + bt);
        }
        let out = Tensor::new(x.shape(), out);
        let (ix, ig, ib) = (self.id, gamma.id, beta.id);
        let shape = x.shape().to_vec();
        self.graph.record(out, &[ix, ig, ib], move |g, sink| {
            let gd = g.data();
            if sink.wants(ig) || sink.wants(ib) {
                let mut dg = vec![T::zero(); c];
                let mut db = vec![T::zero(); c];
                for (j, (grow, hrow)) in gd.chunks(l).zip(xhat.chunks(l)).enumerate() {
                    dg[j % c] = dg[j % c] + grow.iter().zip(hrow).map(|(&a, &b)| a * b).sum::<T>();
                    db[j % c] = db[j % c] + grow.iter().copied().sum::<T>();
                }
                sink.accumulate(ig, Tensor::new(gv.shape(), dg));
                sink.accumulate(ib, Tensor::new(bv.shape(), db));
            }
            if sink.wants(ix) {
                let mut dx = vec![T::zero(); gd.len()];
                let mut m1 = vec![T::zero(); l];
                let mut m2 = vec![T::zero(); l];
                for i in 0..n {
                    let gs = &gd[i * c * l..(i + 1) * c * l];
                    let hs = &xhat[i * c * l..(i + 1) * c * l];
                    m1.iter_mut().for_each(|v| *v = T::zero());
                    m2.iter_mut().for_each(|v| *v = T::zero());
                    for (ch, (grow, hrow)) in gs.chunks(l).zip(hs.chunks(l)).enumerate() {
                        let gm = gv.data()[ch];
                        for ((a, b), (&gg, &hh)) in m1.iter_mut().zip(m2.iter_mut()).zip(grow.iter().zip(hrow)) {
                            let d = gg * gm;
                            *a = *a + d;
                            *b = *b + d * hh;
                        }
                    }
                    let rs = &rstd[i * l..(i + 1) * l];
                    let ds = &mut dx[i * c * l..(i + 1) * c * l];
                    for (ch, ((drow, grow), hrow)) in ds.chunks_mut(l).zip(gs.chunks(l)).zip(hs.chunks(l)).enumerate() {
                        let gm = gv.data()[ch];
                        for p in 0..l {
                            let d = grow[p] * gm;
                            drow[p] = rs[p] * (d - m1[p] / cf - hrow[p] * m2[p] / cf);
                        }
                    }
                }
                sink.accumulate(ix, Tensor::new(&shape, dx));
            }
        })
    }
}
