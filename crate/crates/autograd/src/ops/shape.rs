use crate::{Scalar, Tensor, Var};

pub(crate) fn permute_tensor<T: Scalar>(x: &Tensor<T>, axes: &[usize]) -> Tensor<T> {
    let shape = x.shape();
    let rank = shape.len();
    assert_eq!(axes.len(), rank, "permute: {axes:?} for rank {rank}");
    let mut seen = vec![false; rank];
    for &a in axes {
        assert!(a < rank && !seen[a], "permute: invalid axes {axes:?}");
        seen[a] = true;
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    if x.numel() == 0 || rank == 0 {
        return Tensor::new(&out_shape, x.data().to_vec());
    }
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank - 1).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let data = x.data();
    let last = rank - 1;
    let inner = out_shape[last];
    let inner_stride = strides[last];
    let outer = x.numel() / inner;
    let mut out = Vec::with_capacity(x.numel());
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..outer {
        if inner_stride == 1 {
            out.extend_from_slice(&data[off..off + inner]);
        } else {
            out.extend((0..inner).map(|j| data[off + j * inner_stride]));
        }
        let mut d = last;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            off += strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off -= strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    Tensor::new(&out_shape, out)
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (shape[..axis].iter().product(), shape[axis + 1..].iter().product())
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn reshape(self, shape: &[usize]) -> Self {
        let x = self.value();
        let in_shape = x.shape().to_vec();
        let out = (*x).clone().reshaped(shape);
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            sink.accumulate(ia, g.clone().reshaped(&in_shape));
        })
    }

    pub fn permute(self, axes: &[usize]) -> Self {
        let out = permute_tensor(&self.value(), axes);
        let mut inverse = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            sink.accumulate(ia, permute_tensor(g, &inverse));
        })
    }

    /// Swaps the last two axes.
    pub fn transpose_last(self) -> Self {
        let r = self.value().rank();
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 2, r - 1);
        self.permute(&axes)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Self], axis: usize) -> Self {
        assert!(!parts.is_empty(), "concat of nothing");
        let graph = parts[0].graph;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        let mut sizes = Vec::with_capacity(parts.len());
        for v in &values {
            let s = v.shape();
            assert_eq!(s.len(), base.len(), "concat rank mismatch");
            for (d, (&a, &b)) in s.iter().zip(&base).enumerate() {
                assert!(d == axis || a == b, "concat shape mismatch {s:?} vs {base:?}");
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let (outer, inner) = outer_inner(&base, axis);
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &sz) in values.iter().zip(&sizes) {
                let block = sz * inner;
                out.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let shapes: Vec<Vec<usize>> = values.iter().map(|v| v.shape().to_vec()).collect();
        let out = Tensor::new(&out_shape, out);
        let ids2 = ids.clone();
        graph.record(out, &ids, move |g, sink| {
            let mut start = 0;
            for ((&id, &sz), shape) in ids2.iter().zip(&sizes).zip(&shapes) {
                if sink.wants(id) {
                    let mut d = Vec::with_capacity(outer * sz * inner);
                    for o in 0..outer {
                        let row = o * total * inner;
                        d.extend_from_slice(&g.data()[row + start * inner..row + (start + sz) * inner]);
                    }
                    sink.accumulate(id, Tensor::new(shape, d));
                }
                start += sz;
            }
        })
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(self, axis: usize, start: usize, len: usize) -> Self {
        let x = self.value();
        let shape = x.shape().to_vec();
        assert!(start + len <= shape[axis], "narrow out of range");
        let (outer, inner) = outer_inner(&shape, axis);
        let full = shape[axis];
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let row = o * full * inner;
            out.extend_from_slice(&x.data()[row + start * inner..row + (start + len) * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let ia = self.id;
        self.graph.record(Tensor::new(&out_shape, out), &[ia], move |g, sink| {
            let mut d = vec![T::zero(); outer * full * inner];
            for o in 0..outer {
                let row = o * full * inner;
                d[row + start * inner..row + (start + len) * inner]
                    .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
            }
            sink.accumulate(ia, Tensor::new(&shape, d));
        })
    }

    /// Splits `axis` into `n` equal chunks.
    pub fn chunk(self, n: usize, axis: usize) -> Vec<Self> {
        let size = self.value().dim(axis);
        assert_eq!(size % n, 0, "chunk: {size} not divisible by {n}");
        let step = size / n;
        (0..n).map(|i| self.narrow(axis, i * step, step)).collect()
    }

    /// `[N, C·r², H, W] -> [N, C, H·r, W·r]`.
    pub fn pixel_shuffle(self, r: usize) -> Self {
        let v = self.value();
        let (n, c, h, w) = v.dims4();
        assert_eq!(c % (r * r), 0, "pixel_shuffle: {c} channels, factor {r}");
        let co = c / (r * r);
        self.reshape(&[n, co, r, r, h, w])
            .permute(&[0, 1, 4, 2, 5, 3])
            .reshape(&[n, co, h * r, w * r])
    }
}
