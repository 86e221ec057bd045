use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::GenLv;
use crate::synth::{PromptPair, SamplePair, TaskId};

/// Anything that maps an input and a prompt pair to an output image.
pub trait ImageModel {
    fn id(&self) -> String;

    fn predict(&self, input: &Image, prompt: &PromptPair) -> Result<Image>;

    /// Same prompt for every input.
    fn predict_many(&self, inputs: &[&Image], prompt: &PromptPair) -> Result<Vec<Image>> {
        inputs.iter().map(|i| self.predict(i, prompt)).collect()
    }
}

impl ImageModel for GenLv {
    fn id(&self) -> String {
        format!("genlv:{}", serde_json::to_string(&self.config).unwrap_or_default())
    }

    fn predict(&self, input: &Image, prompt: &PromptPair) -> Result<Image> {
        let s = self.config.image_size;
        if input.height() == s && input.width() == s {
            self.forward_full(&input.to_rgb(), prompt)
        } else {
            self.infer(input, &prompt.source, &prompt.target)
        }
    }

    fn predict_many(&self, inputs: &[&Image], prompt: &PromptPair) -> Result<Vec<Image>> {
        let s = self.config.image_size;
        if inputs.iter().all(|i| i.height() == s && i.width() == s && i.channels() == 3) {
            let mut out = Vec::with_capacity(inputs.len());
            for chunk in inputs.chunks(8) {
                let prompts = vec![(&prompt.source, &prompt.target); chunk.len()];
                out.extend(self.forward_batch(chunk, &prompts)?);
            }
            Ok(out)
        } else {
            inputs.iter().map(|i| self.predict(i, prompt)).collect()
        }
    }
}

/// Returns its input unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl ImageModel for Identity {
    fn id(&self) -> String {
        "identity".into()
    }

    fn predict(&self, input: &Image, _prompt: &PromptPair) -> Result<Image> {
        Ok(input.clone())
    }
}

fn content_key(img: &Image) -> (usize, usize, usize, u64) {
    let h = img.to_u8().iter().fold(0xCBF2_9CE4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
    (img.height(), img.width(), img.channels(), h)
}

/// Looks up the ground-truth target of a known input.
#[derive(Clone, Debug, Default)]
pub struct Oracle {
    table: HashMap<(TaskId, (usize, usize, usize, u64)), Image>,
}

impl Oracle {
    pub fn new<'a>(samples: impl IntoIterator<Item = &'a SamplePair>) -> Self {
        let table =
            samples.into_iter().map(|s| ((s.task.task_id(), content_key(&s.input)), s.target.clone())).collect();
        Self { table }
    }
}

impl ImageModel for Oracle {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn predict(&self, input: &Image, prompt: &PromptPair) -> Result<Image> {
        self.table
            .get(&(prompt.task.task_id(), content_key(input)))
            .cloned()
            .ok_or_else(|| Error::InvalidParam(format!("oracle has no target for this {} input", prompt.task.task_id())))
    }
}

/// Wraps a model and always feeds it the same prompt.
#[derive(Clone, Debug)]
pub struct PromptBlind<M> {
    pub inner: M,
    pub fixed: PromptPair,
}

impl<M: ImageModel> ImageModel for PromptBlind<M> {
    fn id(&self) -> String {
        format!("prompt-blind:{}", self.inner.id())
    }

    fn predict(&self, input: &Image, _prompt: &PromptPair) -> Result<Image> {
        self.inner.predict(input, &self.fixed)
    }

    fn predict_many(&self, inputs: &[&Image], _prompt: &PromptPair) -> Result<Vec<Image>> {
        self.inner.predict_many(inputs, &self.fixed)
    }
}
