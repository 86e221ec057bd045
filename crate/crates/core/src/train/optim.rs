use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use vpip_autograd::{Scalar, Tensor};

use crate::model::{is_no_decay, Moments, Weights};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// One AdamW update of `theta` in place (decoupled decay applied first).
/// `t` is the 1-based step count.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    hp: &AdamWParams,
    t: u64,
    decay: bool,
) {
    let f = T::from_f64_lossy;
    let (b1, b2) = (f(hp.beta1), f(hp.beta2));
    let one = T::one();
    let bc1 = f(1.0 - hp.beta1.powi(t as i32));
    let bc2 = f(1.0 - hp.beta2.powi(t as i32));
    let lr = f(hp.learning_rate);
    let shrink = if decay { f(1.0 - hp.learning_rate * hp.weight_decay) } else { one };
    let eps = f(hp.eps);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        theta[i] = theta[i] * shrink - lr * mhat / (vhat.sqrt() + eps);
    }
}

/// AdamW over named `f32` weights. Moments are created lazily for every
/// parameter that receives a gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub params: AdamWParams,
    pub step: u64,
    pub moments: Moments,
}

impl AdamW {
    pub fn new(params: AdamWParams) -> Self {
        Self { params, step: 0, moments: Moments::default() }
    }

    pub fn apply(&mut self, weights: &mut Weights, grads: &BTreeMap<String, Tensor<f32>>) {
        self.step += 1;
        for (name, g) in grads {
            let theta = weights.get_mut(name).unwrap_or_else(|| panic!("gradient for unknown parameter {name}"));
            let shape = theta.shape().to_vec();
            if self.moments.m.get(name).is_none() {
                self.moments.m.insert(name.clone(), Tensor::zeros(&shape));
                self.moments.v.insert(name.clone(), Tensor::zeros(&shape));
            }
            let m = self.moments.m.get_mut(name).expect("inserted above");
            let v = self.moments.v.get_mut(name).expect("inserted above");
            adamw_update(
                theta.data_mut(),
                g.data(),
                m.data_mut(),
                v.data_mut(),
                &self.params,
                self.step,
                !is_no_decay(name),
            );
        }
    }
}
