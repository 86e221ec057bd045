use crate::{Scalar, Tensor, Var};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'g, T: Scalar> Var<'g, T> {
    pub fn add(self, rhs: Self) -> Self {
        self.same_graph(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let out = a.zip_map(&b, |x, y| x + y);
        let (ia, ib) = (self.id, rhs.id);
        self.graph.record(out, &[ia, ib], move |g, sink| {
            sink.accumulate(ia, g.clone());
            sink.accumulate(ib, g.clone());
        })
    }

    pub fn sub(self, rhs: Self) -> Self {
        self.same_graph(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let out = a.zip_map(&b, |x, y| x - y);
        let (ia, ib) = (self.id, rhs.id);
        self.graph.record(out, &[ia, ib], move |g, sink| {
            sink.accumulate(ia, g.clone());
            if sink.wants(ib) {
                sink.accumulate(ib, g.map(|v| -v));
            }
        })
    }

    pub fn mul(self, rhs: Self) -> Self {
        self.same_graph(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let out = a.zip_map(&b, |x, y| x * y);
        let (ia, ib) = (self.id, rhs.id);
        self.graph.record(out, &[ia, ib], move |g, sink| {
            if sink.wants(ia) {
                sink.accumulate(ia, g.zip_map(&b, |d, y| d * y));
            }
            if sink.wants(ib) {
                sink.accumulate(ib, g.zip_map(&a, |d, x| d * x));
            }
        })
    }

    pub fn scale(self, s: T) -> Self {
        let out = self.value().map(|x| x * s);
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| sink.accumulate(ia, g.map(|d| d * s)))
    }

    pub fn add_scalar(self, s: T) -> Self {
        let out = self.value().map(|x| x + s);
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| sink.accumulate(ia, g.clone()))
    }

    /// GELU, tanh approximation.
    pub fn gelu(self) -> Self {
        let x = self.value();
        let c = T::from_f64_lossy(GELU_C);
        let a = T::from_f64_lossy(GELU_A);
        let half = T::from_f64_lossy(0.5);
        let out = x.map(|v| half * v * (T::one() + (c * (v + a * v * v * v)).tanh()));
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            let three = T::from_f64_lossy(3.0);
            let dx = g.zip_map(&x, |d, v| {
                let t = (c * (v + a * v * v * v)).tanh();
                let dt = (T::one() - t * t) * c * (T::one() + three * a * v * v);
                d * half * (T::one() + t + v * dt)
            });
            sink.accumulate(ia, dx);
        })
    }

    /// Clamps to `[lo, hi]`; the gradient passes where `lo <= x <= hi`.
    pub fn clamp(self, lo: T, hi: T) -> Self {
        let x = self.value();
        let out = x.map(|v| if v.is_nan() { v } else { v.max(lo).min(hi) });
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            let dx = g.zip_map(&x, |d, v| if v >= lo && v <= hi { d } else { T::zero() });
            sink.accumulate(ia, dx);
        })
    }

    pub fn abs(self) -> Self {
        let x = self.value();
        let out = x.map(|v| v.abs());
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            let dx = g.zip_map(&x, |d, v| {
                if v > T::zero() {
                    d
                } else if v < T::zero() {
                    -d
                } else {
                    T::zero()
                }
            });
            sink.accumulate(ia, dx);
        })
    }

    /// `x[n, c, ..] * s[c]`.
    pub fn mul_channel(self, s: Self) -> Self {
        self.same_graph(&s);
        let (x, sv) = (self.value(), s.value());
        let (n, c, l) = x.ncl();
        assert_eq!(sv.numel(), c, "mul_channel: {} scales for {} channels", sv.numel(), c);
        let mut out = (*x).clone();
        for (i, chunk) in out.data_mut().chunks_mut(l).enumerate() {
            let k = sv.data()[i % c];
            chunk.iter_mut().for_each(|v| *v = *v * k);
        }
        let (ix, is) = (self.id, s.id);
        self.graph.record(out, &[ix, is], move |g, sink| {
            if sink.wants(ix) {
                let mut dx = g.clone();
                for (i, chunk) in dx.data_mut().chunks_mut(l).enumerate() {
                    let k = sv.data()[i % c];
                    chunk.iter_mut().for_each(|v| *v = *v * k);
                }
                sink.accumulate(ix, dx);
            }
            if sink.wants(is) {
                let mut ds = vec![T::zero(); c];
                for (i, (gc, xc)) in g.data().chunks(l).zip(x.data().chunks(l)).enumerate() {
                    let acc: T = gc.iter().zip(xc).map(|(&a, &b)| a * b).sum();
                    ds[i % c] = ds[i % c] + acc;
                }
                let _ = n;
                sink.accumulate(is, Tensor::new(sv.shape(), ds));
            }
        })
    }

    /// `x[n, c, ..] + b[c]`.
    pub fn add_channel(self, b: Self) -> Self {
        self.same_graph(&b);
        let (x, bv) = (self.value(), b.value());
        let (_, c, l) = x.ncl();
        assert_eq!(bv.numel(), c, "add_channel: {} biases for {} channels", bv.numel(), c);
        let mut out = (*x).clone();
        for (i, chunk) in out.data_mut().chunks_mut(l).enumerate() {
            let k = bv.data()[i % c];
            chunk.iter_mut().for_each(|v| *v = *v + k);
        }
        let (ix, ib) = (self.id, b.id);
        let bshape = bv.shape().to_vec();
        self.graph.record(out, &[ix, ib], move |g, sink| {
            sink.accumulate(ix, g.clone());
            if sink.wants(ib) {
                let mut db = vec![T::zero(); c];
                for (i, chunk) in g.data().chunks(l).enumerate() {
                    db[i % c] = db[i % c] + chunk.iter().copied().sum();
                }
                sink.accumulate(ib, Tensor::new(&bshape, db));
            }
        })
    }
}
