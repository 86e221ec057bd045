use crate::{gemm, Scalar, Tensor, Var};

fn mat_dims(shape: &[usize], trans: bool) -> (usize, usize, usize) {
    assert!(shape.len() >= 2, "matmul operand needs rank >= 2, got {shape:?}");
    let r = shape.len();
    let batch = shape[..r - 2].iter().product();
    let (rows, cols) = (shape[r - 2], shape[r - 1]);
    if trans {
        (batch, cols, rows)
    } else {
        (batch, rows, cols)
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    /// Batched `op(a) · op(b)` over matching leading dimensions.
    pub fn bmm(self, rhs: Self, trans_a: bool, trans_b: bool) -> Self {
        self.same_graph(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let (ba, m, k) = mat_dims(a.shape(), trans_a);
        let (bb, k2, n) = mat_dims(b.shape(), trans_b);
        assert_eq!(ba, bb, "bmm batch mismatch {:?} x {:?}", a.shape(), b.shape());
        assert_eq!(k, k2, "bmm inner mismatch {:?} x {:?}", a.shape(), b.shape());
        let mut out = vec![T::zero(); ba * m * n];
        for i in 0..ba {
            gemm(
                trans_a,
                trans_b,
                m,
                n,
                k,
                T::one(),
                &a.data()[i * m * k..(i + 1) * m * k],
                &b.data()[i * k * n..(i + 1) * k * n],
                T::zero(),
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let mut out_shape = a.shape()[..a.rank() - 2].to_vec();
        out_shape.extend([m, n]);
        let (ia, ib) = (self.id, rhs.id);
        self.graph.record(Tensor::new(&out_shape, out), &[ia, ib], move |g, sink| {
            let gd = g.data();
            if sink.wants(ia) {
                let mut da = vec![T::zero(); ba * m * k];
                for i in 0..ba {
                    let gi = &gd[i * m * n..(i + 1) * m * n];
                    let bi = &b.data()[i * k * n..(i + 1) * k * n];
                    let di = &mut da[i * m * k..(i + 1) * m * k];
                    match (trans_a, trans_b) {
                        (false, false) => gemm(false, true, m, k, n, T::one(), gi, bi, T::zero(), di),
                        (false, true) => gemm(false, false, m, k, n, T::one(), gi, bi, T::zero(), di),
                        (true, false) => gemm(false, true, k, m, n, T::one(), bi, gi, T::zero(), di),
                        (true, true) => gemm(true, true, k, m, n, T::one(), bi, gi, T::zero(), di),
                    }
                }
                sink.accumulate(ia, Tensor::new(a.shape(), da));
            }
            if sink.wants(ib) {
                let mut db = vec![T::zero(); ba * k * n];
                for i in 0..ba {
                    let gi = &gd[i * m * n..(i + 1) * m * n];
                    let ai = &a.data()[i * m * k..(i + 1) * m * k];
                    let di = &mut db[i * k * n..(i + 1) * k * n];
                    match (trans_a, trans_b) {
                        (false, false) => gemm(true, false, k, n, m, T::one(), ai, gi, T::zero(), di),
                        (true, false) => gemm(false, false, k, n, m, T::one(), ai, gi, T::zero(), di),
                        (false, true) => gemm(true, false, n, k, m, T::one(), gi, ai, T::zero(), di),
                        (true, true) => gemm(true, true, n, k, m, T::one(), gi, ai, T::zero(), di),
                    }
                }
                sink.accumulate(ib, Tensor::new(b.shape(), db));
            }
        })
    }

    /// Softmax over the last axis.
    pub fn softmax_last(self) -> Self {
        let x = self.value();
        let n = *x.shape().last().expect("softmax of scalar");
        let mut out = (*x).clone();
        for row in out.data_mut().chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                s = s + *v;
            }
            for v in row.iter_mut() {
                *v = *v / s;
            }
        }
        let y = out.clone();
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            let mut dx = g.clone();
            for (drow, yrow) in dx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                let dot: T = drow.iter().zip(yrow).map(|(&d, &p)| d * p).sum();
                for (d, &p) in drow.iter_mut().zip(yrow) {
                    *d = p * (*d - dot);
                }
            }
            sink.accumulate(ia, dx);
        })
    }

    /// `x / max(‖x‖₂, eps)` along the last axis.
    pub fn l2_normalize_last(self, eps: T) -> Self {
        let x = self.value();
        let n = *x.shape().last().expect("normalize of scalar");
        let norms: Vec<T> = x
            .data()
            .chunks(n)
            .map(|r| r.iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        let mut out = (*x).clone();
        for (row, &nm) in out.data_mut().chunks_mut(n).zip(&norms) {
            let d = nm.max(eps);
            row.iter_mut().for_each(|v| *v = *v / d);
        }
        let y = out.clone();
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            let mut dx = g.clone();
            for ((drow, yrow), &nm) in dx.data_mut().chunks_mut(n).zip(y.data().chunks(n)).zip(&norms) {
                if nm > eps {
                    let dot: T = drow.iter().zip(yrow).map(|(&d, &p)| d * p).sum();
                    for (d, &p) in drow.iter_mut().zip(yrow) {
                        *d = (*d - p * dot) / nm;
                    }
                } else {
                    drow.iter_mut().for_each(|d| *d = *d / eps);
                }
            }
            sink.accumulate(ia, dx);
        })
    }
}
