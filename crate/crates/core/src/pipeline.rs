//! Config-driven commands behind the `vpip` binary.
//!
//! A run config is a JSON document layered over the defaults of a named
//! profile (`desk` or `paper`). Any leaf can be overridden with a dotted
//! `path=value` assignment. Every command owns one output directory,
//! guarded by a lock file, and replaces its outputs atomically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::corpus::{synthesize_corpus, Corpus, CorpusConfig, SynthStatus, MANIFEST_FILE};
use crate::error::{invalid, io_err, Error, Result};
use crate::eval::{
    evaluate_corpus, mismatch_test, prompt_stability, EvalReport, Identity, ImageModel, MismatchReport, Oracle,
};
use crate::fsutil::write_atomic;
use crate::image::Image;
use crate::model::{Checkpoint, GenLv, ModelConfig};
use crate::seed;
use crate::synth::{BucketRange, PromptPair, RosterEntry, SamplePair, TaskId};
use crate::train::{finetune, FinetuneConfig, FinetuneStrategy, StepRecord, TrainConfig, Trainer};

pub const CONFIG_VERSION: &str = "vpip-config/1";
pub const OUTPUT_ROOT_ENV: &str = "VPIP_OUTPUT_ROOT";
pub const LOCK_FILE: &str = ".vpip.lock";
pub const GRID_PANELS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub corpus_seed: u64,
    pub image_size: usize,
    pub samples_per_task: usize,
    pub tasks: Vec<TaskId>,
    /// Per-task bucket overrides; tasks not listed use their defaults.
    #[serde(default)]
    pub buckets: BTreeMap<TaskId, Vec<BucketRange>>,
}

impl CorpusSection {
    pub fn to_config(&self) -> CorpusConfig {
        let roster = self
            .tasks
            .iter()
            .map(|&t| match self.buckets.get(&t) {
                Some(b) => RosterEntry { task: t, buckets: b.clone() },
                None => RosterEntry::with_defaults(t),
            })
            .collect();
        CorpusConfig {
            corpus_seed: self.corpus_seed,
            image_size: self.image_size,
            samples_per_task: self.samples_per_task,
            roster,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Preset the `config` block was filled from.
    pub preset: String,
    pub init_seed: u64,
    pub config: ModelConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    pub strategy: FinetuneStrategy,
    pub task: TaskId,
    /// Number of pairs taken from the corpus, in manifest order.
    pub pairs: usize,
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub params: FinetuneConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub task: TaskId,
    pub bucket: u8,
    pub pool_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchSection {
    /// Task whose prompt is applied to clean images.
    pub prompt_task: TaskId,
    pub inputs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub prompts_per_task: usize,
    pub seed: u64,
    /// Rows per task in the image grids; 0 disables them.
    pub grid_rows: usize,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub stability: Option<StabilitySection>,
    #[serde(default)]
    pub mismatch: Option<MismatchSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub profile: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub clean_dir: Option<PathBuf>,
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    #[serde(default)]
    pub finetune: Option<FinetuneSection>,
    pub eval: EvalSection,
}

fn profile_defaults(profile: &str) -> Result<Value> {
    let (preset, image_size, train) = match profile {
        "desk" => ("desk_base", 64, TrainConfig::desk()),
        "paper" => ("paper_base", 256, TrainConfig::paper()),
        other => return Err(invalid(format!("unknown profile '{other}' (expected desk or paper)"))),
    };
    Ok(json!({
        "version": CONFIG_VERSION,
        "profile": profile,
        "output_dir": "runs/default",
        "corpus": {
            "corpus_seed": 0,
            "image_size": image_size,
            "samples_per_task": 10,
            "tasks": TaskId::ALL,
        },
        "model": {
            "preset": preset,
            "init_seed": 0,
            "config": ModelConfig::preset(preset)?,
        },
        "train": train,
        "eval": { "prompts_per_task": 3, "seed": 0, "grid_rows": 2 },
    }))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) =
        assignment.split_once('=').ok_or_else(|| invalid(format!("override '{assignment}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(format!("bad override path '{path}'")));
    }
    let mut node = doc;
    for k in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| invalid(format!("override '{path}' descends into a non-object")))?;
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| invalid(format!("override '{path}' descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Builds a config from an optional JSON document plus overrides,
    /// filling everything else from the profile (default `desk`).
    pub fn resolve(doc: Option<Value>, overrides: &[String]) -> Result<Self> {
        let mut user = doc.unwrap_or_else(|| json!({}));
        if !user.is_object() {
            return Err(invalid("config must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        if let Some(v) = user.get("version") {
            if v != CONFIG_VERSION {
                return Err(invalid(format!("unsupported config version {v}, expected \"{CONFIG_VERSION}\"")));
            }
        }
        let profile = user.get("profile").and_then(Value::as_str).unwrap_or("desk").to_string();
        let mut base = profile_defaults(&profile)?;
        if let Some(preset) = user.pointer("/model/preset").and_then(Value::as_str) {
            base["model"]["preset"] = json!(preset);
            base["model"]["config"] = serde_json::to_value(ModelConfig::preset(preset)?)?;
        }
        merge(&mut base, user);
        let cfg: RunConfig = serde_json::from_value(base).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                Some(serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?)
            }
            None => None,
        };
        Self::resolve(doc, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.to_config().validate()?;
        self.model.config.validate()?;
        self.train.validate()?;
        if self.eval.prompts_per_task == 0 {
            return Err(invalid("eval.prompts_per_task must be >= 1"));
        }
        if let Some(f) = &self.finetune {
            if f.pairs < 2 {
                return Err(invalid("finetune.pairs must be >= 2"));
            }
        }
        Ok(())
    }
}

/// Resolved output directory of a run.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    /// Relative `output_dir`s are placed under `env_root` when given.
    pub fn new(cfg: &RunConfig, env_root: Option<&Path>) -> Self {
        let root = match env_root {
            Some(r) if cfg.output_dir.is_relative() => r.join(&cfg.output_dir),
            _ => cfg.output_dir.clone(),
        };
        Self { root }
    }

    pub fn from_env(cfg: &RunConfig) -> Self {
        let env = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        Self::new(cfg, env.as_deref())
    }

    pub fn corpus(&self, cfg: &RunConfig) -> PathBuf {
        cfg.corpus_dir.clone().unwrap_or_else(|| self.root.join("corpus"))
    }

    pub fn train_dir(&self) -> PathBuf {
        self.root.join("train")
    }

    pub fn last_checkpoint(&self) -> PathBuf {
        self.train_dir().join("last.safetensors")
    }

    pub fn loss_log(&self) -> PathBuf {
        self.train_dir().join("loss.log")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn finetune_dir(&self, strategy: FinetuneStrategy) -> PathBuf {
        self.root.join("finetune").join(strategy.as_str())
    }

    /// Takes the directory lock, failing if another process holds it.
    pub fn lock(&self) -> Result<LockGuard> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(invalid(format!(
                "{} is locked by another vpip process (delete {} if it is stale)",
                self.root.display(),
                path.display()
            ))),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(invalid(format!("{what} {} does not exist or is not a directory", path.display())))
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{what} {} does not exist", path.display())))
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutcome {
    pub manifest: PathBuf,
    pub entries: usize,
    pub status: SynthStatus,
}

pub fn cmd_synth(cfg: &RunConfig, layout: &Layout) -> Result<SynthOutcome> {
    let clean = cfg.clean_dir.as_deref().ok_or_else(|| invalid("clean_dir is required for synth"))?;
    require_dir(clean, "clean_dir")?;
    let _lock = layout.lock()?;
    let root = layout.corpus(cfg);
    let (manifest, status) = synthesize_corpus(&cfg.corpus.to_config(), clean, &root)?;
    Ok(SynthOutcome { manifest: root.join(MANIFEST_FILE), entries: manifest.entries.len(), status })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_step: u64,
    pub resumed_from: Option<u64>,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

fn open_corpus(path: &Path) -> Result<Corpus> {
    require_file(&path.join(MANIFEST_FILE), "corpus manifest")?;
    Corpus::open(path)
}

fn read_log(path: &Path, upto: u64) -> Result<Vec<String>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter(|l| {
            l.strip_prefix("step=")
                .and_then(|r| r.split_whitespace().next())
                .and_then(|s| s.parse::<u64>().ok())
                .is_some_and(|s| s <= upto)
        })
        .map(str::to_string)
        .collect())
}

fn write_log(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Trains until `train.max_steps` (or the epoch budget) is reached,
/// resuming from `train/last.safetensors` when present. The loss log and
/// checkpoints are rewritten together, so the log never runs ahead of the
/// last checkpoint.
pub fn cmd_train(cfg: &RunConfig, layout: &Layout, mut progress: impl FnMut(&StepRecord)) -> Result<TrainOutcome> {
    let corpus_dir = layout.corpus(cfg);
    let corpus = open_corpus(&corpus_dir)?;
    let _lock = layout.lock()?;
    let last = layout.last_checkpoint();
    let log_path = layout.loss_log();
    let until = cfg.train.total_steps(corpus.samples.len());

    let (mut trainer, resumed_from) = if last.exists() {
        let ckpt = Checkpoint::load(&last)?;
        if ckpt.config != cfg.model.config {
            return Err(Error::Checkpoint(format!(
                "{} was trained with a different model config; use a fresh output_dir",
                last.display()
            )));
        }
        let step = ckpt.step;
        (Trainer::resume(ckpt, cfg.train.clone())?, Some(step))
    } else {
        (Trainer::new(GenLv::new(cfg.model.config.clone(), cfg.model.init_seed)?, cfg.train.clone())?, None)
    };
    let mut lines = read_log(&log_path, trainer.step())?;
    if trainer.step() >= until {
        return Ok(TrainOutcome { final_step: trainer.step(), resumed_from, checkpoint: last, log: log_path });
    }

    let interval = cfg.train.checkpoint_interval;
    let ckpt_dir = layout.train_dir().join("checkpoints");
    trainer.run(&corpus, until, |rec, t| {
        lines.push(rec.log_line());
        progress(rec);
        if interval > 0 && rec.step % interval == 0 && rec.step < until {
            let ck = t.checkpoint();
            ck.save(&ckpt_dir.join(format!("step_{:08}.safetensors", rec.step)))?;
            ck.save(&last)?;
            write_log(&log_path, &lines)?;
        }
        Ok(())
    })?;
    trainer.checkpoint().save(&last)?;
    write_log(&log_path, &lines)?;
    Ok(TrainOutcome { final_step: trainer.step(), resumed_from, checkpoint: last, log: log_path })
}

#[derive(Clone, Debug)]
pub struct FinetuneResult {
    pub checkpoint: PathBuf,
    pub epoch_losses: Vec<f64>,
    pub stopped_early: bool,
}

pub fn cmd_finetune(cfg: &RunConfig, layout: &Layout) -> Result<FinetuneResult> {
    let ft = cfg.finetune.as_ref().ok_or_else(|| invalid("a finetune section is required"))?;
    let base = ft.checkpoint.clone().unwrap_or_else(|| layout.last_checkpoint());
    require_file(&base, "base checkpoint")?;
    let corpus_dir = ft.corpus_dir.clone().unwrap_or_else(|| layout.corpus(cfg));
    let corpus = open_corpus(&corpus_dir)?;
    let _lock = layout.lock()?;
    let ckpt = Checkpoint::load(&base)?;
    let pairs: Vec<SamplePair> =
        corpus.indices_for(ft.task).into_iter().take(ft.pairs).map(|i| corpus.samples[i].clone()).collect();
    if pairs.len() < ft.pairs {
        return Err(Error::Corpus(format!("corpus has {} {} samples, {} requested", pairs.len(), ft.task, ft.pairs)));
    }
    let mut model = GenLv { config: ckpt.config.clone(), weights: ckpt.weights };
    let outcome = finetune(&mut model, &pairs, ft.strategy, &ft.params)?;
    let dir = layout.finetune_dir(ft.strategy);
    let mut out = Checkpoint::new(model.config, model.weights);
    out.step = ckpt.step;
    out.extra.insert("finetune.strategy".into(), ft.strategy.as_str().into());
    out.extra.insert("finetune.task".into(), ft.task.as_str().into());
    let path = dir.join("model.safetensors");
    out.save(&path)?;
    let log: Vec<String> =
        outcome.epoch_losses.iter().enumerate().map(|(e, l)| format!("epoch={} loss={l:e}", e + 1)).collect();
    write_log(&dir.join("loss.log"), &log)?;
    Ok(FinetuneResult { checkpoint: path, epoch_losses: outcome.epoch_losses, stopped_early: outcome.stopped_early })
}

/// Which model `cmd_eval` scores.
#[derive(Clone, Debug)]
pub enum ModelSource {
    /// `eval.checkpoint`, falling back to the run's last training checkpoint.
    Checkpoint,
    /// Returns each sample's ground truth.
    OracleStub,
    Identity,
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub json: PathBuf,
    pub csv: PathBuf,
    pub grids: Vec<PathBuf>,
}

/// Side-by-side rows of input | prompt source | prompt target | output | target.
pub fn make_grid(rows: &[[&Image; GRID_PANELS]]) -> Result<Image> {
    let first = rows.first().ok_or_else(|| invalid("grid needs at least one row"))?;
    let (h, w) = (first[0].height(), first[0].width());
    let panels: Vec<Vec<Image>> = rows
        .iter()
        .map(|r| r.iter().map(|p| if p.height() == h && p.width() == w { Ok(p.to_rgb()) } else { p.to_rgb().resize(h, w) }).collect())
        .collect::<Result<_>>()?;
    Image::from_fn(rows.len() * h, GRID_PANELS * w, 3, |y, x, c| panels[y / h][x / w].get(y % h, x % w, c))
}

pub fn cmd_eval(cfg: &RunConfig, layout: &Layout, source: ModelSource) -> Result<EvalOutcome> {
    let corpus = open_corpus(&layout.corpus(cfg))?;
    let ckpt_path = cfg.eval.checkpoint.clone().unwrap_or_else(|| layout.last_checkpoint());
    if matches!(source, ModelSource::Checkpoint) {
        require_file(&ckpt_path, "checkpoint")?;
    }
    let _lock = layout.lock()?;
    let (model, model_id): (Box<dyn ImageModel>, String) = match source {
        ModelSource::Checkpoint => {
            let ckpt = Checkpoint::load(&ckpt_path)?;
            if ckpt.config.image_size != cfg.corpus.image_size {
                return Err(invalid(format!(
                    "checkpoint model size {} does not match corpus image_size {}",
                    ckpt.config.image_size, cfg.corpus.image_size
                )));
            }
            let name = ckpt_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let id = format!("checkpoint:{name}@step{}", ckpt.step);
            (Box::new(GenLv { config: ckpt.config, weights: ckpt.weights }), id)
        }
        ModelSource::OracleStub => (Box::new(Oracle::new(&corpus.samples)), "oracle-stub".into()),
        ModelSource::Identity => (Box::new(Identity), "identity".into()),
    };
    let mut report = evaluate_corpus(model.as_ref(), &corpus, cfg.eval.prompts_per_task, cfg.eval.seed)?;
    report.model_id = model_id;
    report.config = serde_json::to_value(cfg)?;

    if let Some(st) = &cfg.eval.stability {
        let mut members: Vec<usize> = corpus
            .indices_for(st.task)
            .into_iter()
            .filter(|&i| corpus.samples[i].task.severity_bucket() == st.bucket)
            .collect();
        let mut rng = seed::rng(seed::derive(cfg.eval.seed, "stability", 0));
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        if members.len() <= st.pool_size {
            return Err(Error::Corpus(format!(
                "stability needs more than {} {} samples in bucket {}, corpus has {}",
                st.pool_size,
                st.task,
                st.bucket,
                members.len()
            )));
        }
        let pool: Vec<PromptPair> = members[..st.pool_size].iter().map(|&i| corpus.samples[i].clone().into()).collect();
        let eval_set: Vec<SamplePair> = members[st.pool_size..].iter().map(|&i| corpus.samples[i].clone()).collect();
        report.stability = Some(prompt_stability(model.as_ref(), &eval_set, &pool)?);
    }

    if let Some(mm) = &cfg.eval.mismatch {
        let prompt_idx = *corpus
            .indices_for(mm.prompt_task)
            .first()
            .ok_or_else(|| Error::Corpus(format!("no {} samples for the mismatch prompt", mm.prompt_task)))?;
        let mut seen = std::collections::BTreeSet::new();
        let inputs: Vec<Image> = corpus
            .samples
            .iter()
            .filter(|s| s.task.task_id().direction() == crate::synth::Direction::Degrade)
            .filter(|s| seen.insert(s.base_id.clone()))
            .take(mm.inputs)
            .map(|s| s.target.clone())
            .collect();
        if inputs.is_empty() {
            return Err(Error::Corpus("mismatch test needs restoration samples for clean inputs".into()));
        }
        let prompt: PromptPair = corpus.samples[prompt_idx].clone().into();
        report.mismatch =
            Some(MismatchReport { prompt_task: mm.prompt_task, psnr: mismatch_test(model.as_ref(), &inputs, &prompt)? });
    }

    let mut grids = Vec::new();
    let mut grid_images = Vec::new();
    if cfg.eval.grid_rows > 0 {
        for task in corpus.tasks() {
            let idx: Vec<usize> = corpus.indices_for(task).into_iter().take(cfg.eval.grid_rows).collect();
            let mut rows_owned = Vec::new();
            for &i in &idx {
                let s = &corpus.samples[i];
                let pseed = seed::derive(cfg.eval.seed, "grid", i as u64);
                let prompt = corpus.sample_prompt_pair(&s.task, &s.base_id, pseed)?;
                let out = model.predict(&s.input, &prompt)?;
                rows_owned.push((i, prompt, out));
            }
            let rows: Vec<[&Image; GRID_PANELS]> = rows_owned
                .iter()
                .map(|(i, p, o)| [&corpus.samples[*i].input, &p.source, &p.target, o, &corpus.samples[*i].target])
                .collect();
            if !rows.is_empty() {
                grid_images.push((task, make_grid(&rows)?));
            }
        }
    }

    let dir = layout.eval_dir();
    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    write_atomic(&json, report.to_json()?.as_bytes())?;
    write_atomic(&csv, report.to_csv().as_bytes())?;
    for (task, img) in grid_images {
        let p = dir.join("grids").join(format!("{task}.png"));
        img.save_atomic(&p)?;
        grids.push(p);
    }
    Ok(EvalOutcome { report, json, csv, grids })
}

/// Runs one image through a checkpoint. Returns the PSNR against
/// `ground_truth` when given.
pub fn cmd_infer(
    checkpoint: &Path,
    input: &Path,
    prompt_source: &Path,
    prompt_target: &Path,
    out: &Path,
    ground_truth: Option<&Path>,
) -> Result<Option<f64>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = GenLv { config: ckpt.config, weights: ckpt.weights };
    let img = Image::load(input)?;
    let result = model.infer(&img, &Image::load(prompt_source)?, &Image::load(prompt_target)?)?;
    let gt = ground_truth.map(Image::load).transpose()?;
    result.save_atomic(out)?;
    gt.map(|g| crate::eval::psnr(&result.quantized(), &g)).transpose()
}

/// Plain-text table of a saved report.
pub fn render_report(report: &EvalReport) -> String {
    use std::fmt::Write as _;
    let cell = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    let mut out = format!("model: {}\n", report.model_id);
    let _ = writeln!(out, "{:<24} {:>5} {:>9} {:>7} {:>8} {:>10}", "task", "n", "psnr", "ssim", "mae", "prompt_std");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>9} {:>7} {:>8} {:>10.4}",
            r.task_id.as_str(),
            r.n,
            cell(r.psnr_mean, 2),
            cell(r.ssim_mean, 4),
            cell(r.mae_mean, 2),
            r.prompt_std
        );
    }
    if let Some(s) = &report.stability {
        let _ = writeln!(out, "stability over {} prompts: mean {:.3} dB, std {:.4} dB", s.per_prompt.len(), s.mean, s.std);
    }
    if let Some(m) = &report.mismatch {
        let (mean, _) = crate::eval::mean_std(&m.psnr);
        let _ = writeln!(out, "mismatch ({} prompt on clean inputs): mean PSNR(out, in) {mean:.2} dB", m.prompt_task);
    }
    out
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    EvalReport::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
}
