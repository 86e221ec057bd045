use crate::{Scalar, Tensor, Var};

impl<'g, T: Scalar> Var<'g, T> {
    pub fn sum(self) -> Self {
        let x = self.value();
        let shape = x.shape().to_vec();
        let out = Tensor::scalar(x.sum());
        let ia = self.id;
        self.graph.record(out, &[ia], move |g, sink| {
            sink.accumulate(ia, Tensor::full(&shape, g.data()[0]));
        })
    }

    pub fn mean(self) -> Self {
        let n = self.value().numel();
        self.sum().scale(T::one() / T::from_usize(n).unwrap())
    }

    /// `sum(x ⊙ w)` for a constant weight tensor; the usual scalar probe in
    /// gradient checks.
    pub fn dot_const(self, w: &Tensor<T>) -> Self {
        let x = self.value();
        assert_eq!(x.shape(), w.shape(), "dot_const shape mismatch");
        let out = Tensor::scalar(x.data().iter().zip(w.data()).map(|(&a, &b)| a * b).sum());
        let ia = self.id;
        let w = w.clone();
        self.graph.record(out, &[ia], move |g, sink| {
            let s = g.data()[0];
            sink.accumulate(ia, w.map(|v| v * s));
        })
    }

    /// Mean absolute difference against a constant target.
    pub fn l1_to(self, target: &Tensor<T>) -> Self {
        let t = self.graph.constant(target.clone());
        self.sub(t).abs().mean()
    }
}
