use serde::{Deserialize, Serialize};

use super::metrics::{mae, mean_std, psnr, ssim};
use super::models::ImageModel;
use super::report::{EvalReport, TaskRecord};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::seed;
use crate::synth::{Category, PromptPair, SamplePair};

pub const STABILITY_POOL: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    #[serde(with = "super::report::float")]
    pub mean: f64,
    #[serde(with = "super::report::float")]
    pub std: f64,
    #[serde(with = "super::report::float_vec")]
    pub per_prompt: Vec<f64>,
}

/// Mean PSNR over `eval_set` for each prompt of the pool, summarized by
/// mean and population std across prompts.
pub fn prompt_stability(model: &dyn ImageModel, eval_set: &[SamplePair], pool: &[PromptPair]) -> Result<Stability> {
    if pool.len() != STABILITY_POOL {
        return Err(Error::InvalidParam(format!("stability needs exactly {STABILITY_POOL} prompts, got {}", pool.len())));
    }
    if eval_set.is_empty() {
        return Err(Error::InvalidParam("empty evaluation set".into()));
    }
    let inputs: Vec<&Image> = eval_set.iter().map(|s| &s.input).collect();
    let per_prompt = pool
        .iter()
        .map(|p| {
            let outs = model.predict_many(&inputs, p)?;
            let v = outs.iter().zip(eval_set).map(|(o, s)| psnr(o, &s.target)).collect::<Result<Vec<_>>>()?;
            Ok(mean_std(&v).0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&per_prompt);
    Ok(Stability { mean, std, per_prompt })
}

/// PSNR between each output and its own input under an unrelated prompt.
pub fn mismatch_test(model: &dyn ImageModel, inputs: &[Image], prompt: &PromptPair) -> Result<Vec<f64>> {
    let refs: Vec<&Image> = inputs.iter().collect();
    let outs = model.predict_many(&refs, prompt)?;
    outs.iter().zip(inputs).map(|(o, i)| psnr(o, i)).collect()
}

/// Runs every corpus sample through `model` once per pass. In pass `k`
/// each (task, bucket) uses one prompt chosen from the corpus; samples
/// whose base image coincides with that prompt fall back to the next entry
/// of the pool. `prompt_std` is the population std of per-pass means of the
/// task's headline metric (MAE for feature extraction, PSNR otherwise).
pub fn evaluate_corpus(model: &dyn ImageModel, corpus: &Corpus, prompts_per_task: usize, seed: u64) -> Result<EvalReport> {
    if prompts_per_task == 0 {
        return Err(Error::InvalidParam("prompts_per_task must be >= 1".into()));
    }
    let mut records = Vec::new();
    for task in corpus.tasks() {
        let idx = corpus.indices_for(task);
        if idx.is_empty() {
            return Err(Error::Corpus(format!("no samples for task {task}")));
        }
        let cat = task.category();
        let (mut psnrs, mut ssims, mut maes) = (Vec::new(), Vec::new(), Vec::new());
        let mut pass_means = Vec::with_capacity(prompts_per_task);
        for pass in 0..prompts_per_task {
            let mut headline = Vec::with_capacity(idx.len());
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for &i in &idx {
                let s = &corpus.samples[i];
                let pseed = seed::derive(seed, task.as_str(), (pass * 256 + s.task.severity_bucket() as usize) as u64);
                let j = corpus.select_prompt(&s.task, "", pseed)?;
                let j = if corpus.samples[j].base_id == s.base_id {
                    corpus.select_prompt(&s.task, &s.base_id, pseed)?
                } else {
                    j
                };
                groups.entry(j).or_default().push(i);
            }
            for (j, members) in groups {
                let prompt: PromptPair = corpus.samples[j].clone().into();
                let inputs: Vec<&Image> = members.iter().map(|&i| &corpus.samples[i].input).collect();
                let outs = model.predict_many(&inputs, &prompt)?;
                for (o, &i) in outs.iter().zip(&members) {
                    let t = &corpus.samples[i].target;
                    let p = psnr(o, t)?;
                    let m = mae(o, t)?;
                    psnrs.push(p);
                    maes.push(m);
                    if cat != Category::FeatureExtraction {
                        ssims.push(ssim(o, t)?);
                    }
                    headline.push(if cat == Category::FeatureExtraction { m } else { p });
                }
            }
            pass_means.push(mean_std(&headline).0);
        }
        let with = |on: bool, v: &[f64]| on.then(|| mean_std(v).0);
        let image_metrics = cat != Category::FeatureExtraction;
        let edge_metrics = matches!(cat, Category::FeatureExtraction | Category::Stylization);
        records.push(TaskRecord {
            task_id: task,
            n: idx.len(),
            psnr_mean: with(image_metrics, &psnrs),
            ssim_mean: with(image_metrics, &ssims),
            mae_mean: with(edge_metrics, &maes),
            prompt_std: mean_std(&pass_means).1,
        });
    }
    Ok(EvalReport::new(model.id(), records))
}
