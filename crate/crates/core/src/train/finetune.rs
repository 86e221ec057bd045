use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{train_step, AdamW, Example, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{GenLv, Weights};
use crate::seed;
use crate::synth::SamplePair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneStrategy {
    PromptEncoderOnly,
    PlusLatentBlocks,
    PlusInputEncoder,
    Full,
    FullBackbone,
}

impl FinetuneStrategy {
    pub const ALL: [FinetuneStrategy; 5] =
        [Self::PromptEncoderOnly, Self::PlusLatentBlocks, Self::PlusInputEncoder, Self::Full, Self::FullBackbone];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PromptEncoderOnly => "prompt_encoder_only",
            Self::PlusLatentBlocks => "plus_latent_blocks",
            Self::PlusInputEncoder => "plus_input_encoder",
            Self::Full => "full",
            Self::FullBackbone => "full_backbone",
        }
    }
}

impl fmt::Display for FinetuneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FinetuneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown fine-tuning strategy '{s}'")))
    }
}

fn is_prompt_encoder(name: &str) -> bool {
    name.starts_with("prompt_encoder.")
}

fn is_latent(name: &str) -> bool {
    name.starts_with("backbone.latent.")
}

fn is_input_encoder(name: &str) -> bool {
    let rest = match name.strip_prefix("backbone.") {
        Some(r) => r,
        None => return false,
    };
    rest.starts_with("stem.") || rest.starts_with("enc") || rest.starts_with("down")
}

/// Names of the parameters updated under `strategy`.
pub fn select_trainable<T: vpip_autograd::Scalar>(weights: &Weights<T>, strategy: FinetuneStrategy) -> BTreeSet<String> {
    let keep = |n: &str| match strategy {
        FinetuneStrategy::PromptEncoderOnly => is_prompt_encoder(n),
        FinetuneStrategy::PlusLatentBlocks => is_prompt_encoder(n) || is_latent(n),
        FinetuneStrategy::PlusInputEncoder => is_prompt_encoder(n) || is_latent(n) || is_input_encoder(n),
        FinetuneStrategy::Full => true,
        FinetuneStrategy::FullBackbone => !is_prompt_encoder(n),
    };
    weights.names().filter(|n| keep(n)).map(str::to_string).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Examples per step; 0 means the whole few-shot set.
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without a relative improvement of `min_improvement` before
    /// stopping.
    pub patience: usize,
    pub min_improvement: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { epochs: 30, learning_rate: 1e-3, batch_size: 0, seed: 0, patience: 10, min_improvement: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneOutcome {
    pub epoch_losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Adapts `model` to the task shown by `pairs`. Each pair is trained with a
/// prompt drawn from the other pairs.
pub fn finetune(
    model: &mut GenLv,
    pairs: &[SamplePair],
    strategy: FinetuneStrategy,
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    if pairs.len() < 2 {
        return Err(Error::InvalidParam(format!("fine-tuning needs at least 2 pairs, got {}", pairs.len())));
    }
    let trainable = select_trainable(&model.weights, strategy);
    let base = TrainConfig { learning_rate: config.learning_rate, seed: config.seed, ..TrainConfig::desk() };
    base.validate()?;
    let mut opt = AdamW::new(base.adamw());
    let batch_size = if config.batch_size == 0 { pairs.len() } else { config.batch_size };
    let pred = |n: &str| trainable.contains(n);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let (mut best, mut stale) = (f64::INFINITY, 0usize);
    for epoch in 0..config.epochs {
        let mut rng = seed::rng(seed::derive(config.seed, "finetune", epoch as u64));
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(batch_size) {
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&i| {
                    let mut j = rng.gen_range(0..pairs.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    Example {
                        input: &pairs[i].input,
                        target: &pairs[i].target,
                        prompt_source: &pairs[j].input,
                        prompt_target: &pairs[j].target,
                    }
                })
                .collect();
            losses.push(train_step(model, &batch, &mut opt, &pred)?);
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        epoch_losses.push(loss);
        if loss < best * (1.0 - config.min_improvement) {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                return Ok(FinetuneOutcome { epoch_losses, stopped_early: true });
            }
        }
    }
    Ok(FinetuneOutcome { epoch_losses, stopped_early: false })
}
