//! Multi-task training and few-shot fine-tuning.

mod config;
mod finetune;
mod optim;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use vpip_autograd::Graph;

pub use config::{TaskSampling, TrainConfig};
pub use finetune::{finetune, select_trainable, FinetuneConfig, FinetuneOutcome, FinetuneStrategy};
pub use optim::{adamw_update, AdamW, AdamWParams};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::{images_to_tensor, net, Checkpoint, GenLv, Params};
use crate::seed;
use crate::synth::TaskId;

/// Mean absolute difference over all elements.
pub fn l1_loss(pred: &Image, target: &Image) -> Result<f64> {
    if !pred.same_shape(target) {
        return Err(Error::ShapeMismatch("l1_loss operands differ in shape".into()));
    }
    let s: f64 = pred.data().iter().zip(target.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// One training example: a corpus sample and the corpus sample serving as
/// its prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchItem {
    pub sample: usize,
    pub prompt: usize,
}

/// Images of one example, borrowed from wherever they live.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub input: &'a Image,
    pub target: &'a Image,
    pub prompt_source: &'a Image,
    pub prompt_target: &'a Image,
}

/// Draws `batch_size` examples. Each gets a severity-matched prompt from a
/// different base image.
pub fn make_batch(corpus: &Corpus, batch_size: usize, step_seed: u64, sampling: TaskSampling) -> Result<Vec<BatchItem>> {
    let tasks: Vec<TaskId> = corpus.tasks();
    let by_task: Vec<Vec<usize>> = tasks.iter().map(|&t| corpus.indices_for(t)).collect();
    if corpus.samples.is_empty() || by_task.iter().any(Vec::is_empty) {
        return Err(Error::Corpus("every rostered task needs at least one sample".into()));
    }
    let mut rng = seed::rng(step_seed);
    (0..batch_size)
        .map(|_| {
            let sample = match sampling {
                TaskSampling::UniformTask => {
                    let pool = &by_task[rng.gen_range(0..tasks.len())];
                    pool[rng.gen_range(0..pool.len())]
                }
                TaskSampling::UniformSample => rng.gen_range(0..corpus.samples.len()),
            };
            let s = &corpus.samples[sample];
            let prompt = corpus.select_prompt(&s.task, &s.base_id, rng.gen())?;
            Ok(BatchItem { sample, prompt })
        })
        .collect()
}

pub fn examples<'a>(corpus: &'a Corpus, batch: &[BatchItem]) -> Vec<Example<'a>> {
    batch
        .iter()
        .map(|b| {
            let (s, p) = (&corpus.samples[b.sample], &corpus.samples[b.prompt]);
            Example { input: &s.input, target: &s.target, prompt_source: &p.input, prompt_target: &p.target }
        })
        .collect()
}

/// Forward, L1 loss, backward and one optimizer update of the parameters
/// accepted by `trainable`. Returns the pre-update loss.
pub fn train_step(
    model: &mut GenLv,
    batch: &[Example<'_>],
    opt: &mut AdamW,
    trainable: &dyn Fn(&str) -> bool,
) -> Result<f64> {
    let g = Graph::<f32>::new();
    let p = Params::bind(&g, &model.weights, trainable);
    let x = g.constant(images_to_tensor::<f32>(&batch.iter().map(|e| e.input).collect::<Vec<_>>())?);
    let ps = g.constant(images_to_tensor(&batch.iter().map(|e| e.prompt_source).collect::<Vec<_>>())?);
    let pt = g.constant(images_to_tensor(&batch.iter().map(|e| e.prompt_target).collect::<Vec<_>>())?);
    let target = images_to_tensor(&batch.iter().map(|e| e.target).collect::<Vec<_>>())?;
    let out = net::forward(&p, &model.config, x, ps, pt)?;
    let loss_var = out.l1_to(&target);
    let loss = loss_var.value().data()[0] as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: opt.step + 1, loss, tasks: String::new() });
    }
    let mut grads = g.backward(loss_var);
    let named: BTreeMap<String, _> = p
        .iter()
        .filter(|(_, v)| v.requires_grad())
        .filter_map(|(name, v)| grads.take(v).map(|t| (name.to_string(), t)))
        .collect();
    drop(p);
    opt.apply(&mut model.weights, &named);
    Ok(loss)
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub tasks: Vec<TaskId>,
}

impl StepRecord {
    /// `step=<n> loss=<value> tasks=<a,b,...>`; the loss is printed with
    /// enough digits to round-trip.
    pub fn log_line(&self) -> String {
        let tasks: Vec<&str> = self.tasks.iter().map(|t| t.as_str()).collect();
        format!("step={} loss={:e} tasks={}", self.step, self.loss, tasks.join(","))
    }
}

/// Owns the model and optimizer state for a training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: GenLv,
    pub opt: AdamW,
    pub config: TrainConfig,
    pub trainable: Option<BTreeSet<String>>,
}

impl Trainer {
    pub fn new(model: GenLv, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { opt: AdamW::new(config.adamw()), model, config, trainable: None })
    }

    /// Restores model, optimizer moments and step counter.
    pub fn resume(ckpt: Checkpoint, config: TrainConfig) -> Result<Self> {
        let mut t = Self::new(GenLv { config: ckpt.config, weights: ckpt.weights }, config)?;
        t.opt.step = ckpt.step;
        t.opt.moments = ckpt.moments.unwrap_or_default();
        Ok(t)
    }

    pub fn step(&self) -> u64 {
        self.opt.step
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.model.config.clone(),
            weights: self.model.weights.clone(),
            step: self.opt.step,
            moments: Some(self.opt.moments.clone()),
            extra: BTreeMap::new(),
        }
    }

    /// Runs one step on the batch drawn for the current step counter.
    pub fn train_one(&mut self, corpus: &Corpus) -> Result<StepRecord> {
        let step = self.opt.step + 1;
        let batch = make_batch(
            corpus,
            self.config.batch_size,
            seed::derive(self.config.seed, "batch", step),
            self.config.task_sampling,
        )?;
        let tasks: Vec<TaskId> = batch.iter().map(|b| corpus.samples[b.sample].task.task_id()).collect();
        let ex = examples(corpus, &batch);
        let trainable = self.trainable.clone();
        let pred = move |n: &str| trainable.as_ref().map_or(true, |s| s.contains(n));
        let loss = train_step(&mut self.model, &ex, &mut self.opt, &pred).map_err(|e| match e {
            Error::NonFiniteLoss { step, loss, .. } => Error::NonFiniteLoss {
                step,
                loss,
                tasks: tasks.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","),
            },
            other => other,
        })?;
        Ok(StepRecord { step, loss, tasks })
    }

    /// Trains until the step counter reaches `until`, calling `on_step`
    /// after every update.
    pub fn run(
        &mut self,
        corpus: &Corpus,
        until: u64,
        mut on_step: impl FnMut(&StepRecord, &Trainer) -> Result<()>,
    ) -> Result<()> {
        while self.opt.step < until {
            let rec = self.train_one(corpus)?;
            on_step(&rec, self)?;
        }
        Ok(())
    }
}
