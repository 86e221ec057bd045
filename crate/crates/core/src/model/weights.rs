use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use vpip_autograd::{Scalar, Tensor};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal with the given std, resampled outside ±2 std.
    TruncNormal(f64),
    /// Uniform with variance 1/fan_in, i.e. in ±√(3/fan_in).
    FanIn(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Collects parameter declarations in network order.
#[derive(Default)]
pub(crate) struct SpecList(pub Vec<ParamSpec>);

impl SpecList {
    fn push(&mut self, name: String, shape: &[usize], init: Init) {
        self.0.push(ParamSpec { name, shape: shape.to_vec(), init });
    }

    /// Pointwise projection inside an attention or feed-forward branch.
    pub fn proj(&mut self, prefix: &str, cout: usize, cin: usize) {
        self.push(format!("{prefix}.weight"), &[cout, cin, 1, 1], Init::TruncNormal(0.02));
        self.push(format!("{prefix}.bias"), &[cout], Init::Zeros);
    }

    /// Dense `k×k` convolution with bias.
    pub fn conv(&mut self, prefix: &str, cout: usize, cin: usize, k: usize) {
        self.push(format!("{prefix}.weight"), &[cout, cin, k, k], Init::FanIn(cin * k * k));
        self.push(format!("{prefix}.bias"), &[cout], Init::Zeros);
    }

    pub fn zero_conv(&mut self, prefix: &str, cout: usize, cin: usize, k: usize) {
        self.push(format!("{prefix}.weight"), &[cout, cin, k, k], Init::Zeros);
        self.push(format!("{prefix}.bias"), &[cout], Init::Zeros);
    }

    pub fn depthwise(&mut self, prefix: &str, c: usize) {
        self.push(format!("{prefix}.weight"), &[c, 1, 3, 3], Init::FanIn(9));
        self.push(format!("{prefix}.bias"), &[c], Init::Zeros);
    }

    pub fn norm(&mut self, prefix: &str, c: usize) {
        self.push(format!("{prefix}.weight"), &[c], Init::Ones);
        self.push(format!("{prefix}.bias"), &[c], Init::Zeros);
    }

    pub fn tensor(&mut self, name: String, shape: &[usize], init: Init) {
        self.push(name, shape, init);
    }
}

fn init_tensor(spec: &ParamSpec, seed: u64) -> Tensor<f32> {
    let n: usize = spec.shape.iter().product();
    let mut rng = seed::rng(seed);
    let data: Vec<f32> = match spec.init {
        Init::Zeros => vec![0.0; n],
        Init::Ones => vec![1.0; n],
        Init::TruncNormal(std) => {
            let normal = Normal::new(0.0, std).expect("positive std");
            (0..n)
                .map(|_| loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= 2.0 * std {
                        break v as f32;
                    }
                })
                .collect()
        }
        Init::FanIn(fan_in) => {
            let bound = (3.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..bound) as f32).collect()
        }
    };
    Tensor::new(&spec.shape, data)
}

/// Named parameter set, ordered by name.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T: Scalar = f32> {
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Self { params: BTreeMap::new() }
    }
}

impl<T: Scalar> Weights<T> {
    pub fn new(params: BTreeMap<String, Tensor<T>>) -> Self {
        Self { params }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.params.insert(name.into(), t);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights { params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.params.values().all(Tensor::all_finite)
    }
}

pub fn count_params<T: Scalar>(weights: &Weights<T>) -> usize {
    weights.params.values().map(Tensor::numel).sum()
}

/// Initializes every parameter of the network described by `config`. Each
/// tensor draws from its own stream keyed by `(init_seed, name)`.
pub fn build_model(config: &ModelConfig, init_seed: u64) -> Result<Weights> {
    config.validate()?;
    let mut params = BTreeMap::new();
    for spec in super::param_specs(config) {
        let t = init_tensor(&spec, seed::derive(init_seed, &spec.name, 0));
        if params.insert(spec.name.clone(), t).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate parameter {}", spec.name)));
        }
    }
    Ok(Weights { params })
}

/// Parameters exempt from weight decay: biases, norm affines and attention
/// temperatures.
pub fn is_no_decay(name: &str) -> bool {
    name.ends_with(".bias") || name.ends_with("temperature") || name.split('.').any(|p| p.starts_with("norm"))
}
