use serde::{Deserialize, Serialize};

use super::optim::AdamWParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSampling {
    /// Task first, then a sample of that task.
    UniformTask,
    /// Any corpus sample with equal probability.
    UniformSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Passes over the corpus; ignored when `max_steps` is set.
    pub epochs: usize,
    #[serde(default)]
    pub max_steps: Option<u64>,
    pub task_sampling: TaskSampling,
    pub seed: u64,
    /// Steps between checkpoints; 0 disables periodic checkpoints.
    pub checkpoint_interval: u64,
}

fn default_eps() -> f64 {
    1e-8
}

impl TrainConfig {
    /// Desk-scale defaults.
    pub fn desk() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            weight_decay: 1e-4,
            batch_size: 8,
            epochs: 30,
            max_steps: None,
            task_sampling: TaskSampling::UniformTask,
            seed: 0,
            checkpoint_interval: 500,
        }
    }

    /// The published full-scale recipe.
    pub fn paper() -> Self {
        Self { learning_rate: 1e-4, batch_size: 64, epochs: 30, checkpoint_interval: 5000, ..Self::desk() }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            _ => Err(Error::InvalidConfig(format!("unknown training profile '{name}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be > 0 and weight_decay >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        Ok(())
    }

    pub fn adamw(&self) -> AdamWParams {
        AdamWParams {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Total optimizer steps for a corpus of `corpus_len` samples.
    pub fn total_steps(&self, corpus_len: usize) -> u64 {
        self.max_steps.unwrap_or_else(|| (self.epochs * corpus_len.div_ceil(self.batch_size)) as u64)
    }
}
