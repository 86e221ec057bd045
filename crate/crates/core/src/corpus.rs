//! On-disk corpus: synthesis, manifest, loading and prompt selection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::fsutil;
use crate::image::Image;
use crate::seed;
use crate::synth::{make_sample, PromptPair, RosterEntry, SamplePair, TaskId, TaskSpec};

pub const CORPUS_VERSION: &str = "vpip-corpus/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub corpus_seed: u64,
    /// Side length of the square crops.
    pub image_size: usize,
    pub samples_per_task: usize,
    pub roster: Vec<RosterEntry>,
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < crate::image::MIN_SIDE {
            return Err(Error::Corpus(format!("image_size must be >= {}", crate::image::MIN_SIDE)));
        }
        if self.samples_per_task == 0 {
            return Err(Error::Corpus("samples_per_task must be >= 1".into()));
        }
        if self.roster.is_empty() {
            return Err(Error::Corpus("roster is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.roster {
            if !seen.insert(e.task) {
                return Err(Error::Corpus(format!("task {} listed twice in roster", e.task)));
            }
            e.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    /// Paths relative to the corpus root.
    pub input: String,
    pub target: String,
    pub task: TaskSpec,
    pub seed: u64,
    pub base_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub version: String,
    pub corpus_seed: u64,
    pub image_size: usize,
    pub samples_per_task: usize,
    pub roster: Vec<RosterEntry>,
    pub skipped_files: usize,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: CorpusManifest = serde_json::from_str(s)?;
        if m.version != CORPUS_VERSION {
            return Err(Error::Corpus(format!("unsupported corpus version '{}'", m.version)));
        }
        Ok(m)
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        self.roster.iter().map(|e| e.task).collect()
    }

    pub fn roster_entry(&self, task: TaskId) -> Option<&RosterEntry> {
        self.roster.iter().find(|e| e.task == task)
    }

    pub fn entries_for(&self, task: TaskId) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries.iter().enumerate().filter(move |(_, e)| e.task.task_id() == task)
    }
}

/// Outcome of writing a corpus directory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthStatus {
    Created,
    Replaced,
    Unchanged,
}

/// Loads every readable image under `dir` (non-recursive, sorted by file
/// name). Returns `(stem, image)` pairs and the number of skipped files.
pub fn load_clean_images(dir: &Path) -> Result<(Vec<(String, Image)>, usize)> {
    if !dir.is_dir() {
        return Err(Error::Corpus(format!("clean image directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    paths.sort();
    let mut images = Vec::new();
    let mut skipped = 0;
    for p in paths {
        match Image::load(&p) {
            Ok(img) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                images.push((stem, img));
            }
            Err(e) => {
                log::warn!("skipping unreadable image {}: {e}", p.display());
                skipped += 1;
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Corpus(format!("no readable images in {}", dir.display())));
    }
    Ok((images, skipped))
}

/// Seeded square crop of side `size`. Large images are first downscaled so
/// their short side is at most twice `size`; small ones are upscaled.
pub fn random_crop(img: &Image, size: usize, seed: u64) -> Result<Image> {
    let short = img.height().min(img.width());
    let scale = if short < size {
        size as f64 / short as f64
    } else if short > 2 * size {
        (2 * size) as f64 / short as f64
    } else {
        1.0
    };
    let img = if scale == 1.0 {
        img.clone()
    } else {
        let h = ((img.height() as f64 * scale).round() as usize).max(size);
        let w = ((img.width() as f64 * scale).round() as usize).max(size);
        img.resize(h, w)?
    };
    let mut rng = seed::rng(seed);
    let y0 = rng.gen_range(0..=img.height() - size);
    let x0 = rng.gen_range(0..=img.width() - size);
    Ok(img.crop(y0, x0, size, size)?.quantized())
}

/// Bucket of sample `index` for a task with `n_buckets` buckets.
pub fn bucket_of(index: usize, n_buckets: usize) -> u8 {
    (index % n_buckets) as u8
}

/// Builds sample `index` of `entry`. Bases rotate per bucket so every
/// bucket sees distinct base images first.
pub fn synthesize_sample(
    config: &CorpusConfig,
    entry: &RosterEntry,
    bases: &[(String, Image)],
    index: usize,
) -> Result<SamplePair> {
    let n_buckets = entry.buckets.len();
    let bucket = bucket_of(index, n_buckets);
    let sample_seed = seed::derive(config.corpus_seed, entry.task.as_str(), index as u64);
    let offset = (seed::hash_str(entry.task.as_str()) % bases.len() as u64) as usize;
    let (base_id, base) = &bases[(index / n_buckets + offset) % bases.len()];
    let crop = random_crop(base, config.image_size, seed::derive(sample_seed, "crop", 0))?;
    let spec = entry.sample_spec(bucket, seed::derive(sample_seed, "params", 0))?;
    let pair = make_sample(&spec, &crop, seed::derive(sample_seed, "op", 0), base_id)?;
    Ok(SamplePair { input: pair.input.quantized(), target: pair.target.quantized(), seed: sample_seed, ..pair })
}

fn sample_paths(task: TaskId, index: usize) -> (String, String) {
    let dir = format!("images/{}", task.as_str());
    (format!("{dir}/{index:05}_input.png"), format!("{dir}/{index:05}_target.png"))
}

/// Writes the full corpus under `root`. The tree is staged next to `root`
/// and swapped in only when complete; an identical existing corpus is left
/// untouched.
pub fn synthesize_corpus(config: &CorpusConfig, clean_dir: &Path, root: &Path) -> Result<(CorpusManifest, SynthStatus)> {
    config.validate()?;
    let (bases, skipped) = load_clean_images(clean_dir)?;
    let parent = fsutil::parent_dir(root);
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let staged = tempfile::Builder::new().prefix(".vpip-corpus-").tempdir_in(&parent).map_err(io_err(&parent))?;
    let mut entries = Vec::new();
    for entry in &config.roster {
        fs::create_dir_all(staged.path().join("images").join(entry.task.as_str())).map_err(io_err(staged.path()))?;
        for index in 0..config.samples_per_task {
            let pair = synthesize_sample(config, entry, &bases, index)?;
            let (input, target) = sample_paths(entry.task, index);
            pair.input.save(staged.path().join(&input))?;
            pair.target.save(staged.path().join(&target))?;
            entries.push(ManifestEntry { index, input, target, task: pair.task, seed: pair.seed, base_id: pair.base_id });
        }
    }
    entries.sort_by(|a, b| (a.task.task_id().as_str(), a.index).cmp(&(b.task.task_id().as_str(), b.index)));
    let manifest = CorpusManifest {
        version: CORPUS_VERSION.into(),
        corpus_seed: config.corpus_seed,
        image_size: config.image_size,
        samples_per_task: config.samples_per_task,
        roster: config.roster.clone(),
        skipped_files: skipped,
        entries,
    };
    let mpath = staged.path().join(MANIFEST_FILE);
    fs::write(&mpath, manifest.to_json()?).map_err(io_err(&mpath))?;
    let status = if root.exists() {
        if fsutil::trees_equal(staged.path(), root)? {
            return Ok((manifest, SynthStatus::Unchanged));
        }
        SynthStatus::Replaced
    } else {
        SynthStatus::Created
    };
    fsutil::swap_dir(&staged.keep(), root)?;
    Ok((manifest, status))
}

pub fn read_manifest(root: &Path) -> Result<CorpusManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m = CorpusManifest::from_json(&text)?;
    for e in &m.entries {
        for rel in [&e.input, &e.target] {
            if !root.join(rel).is_file() {
                return Err(Error::Corpus(format!("manifest references missing file {rel}")));
            }
        }
    }
    Ok(m)
}

/// Index of a uniformly chosen entry with the same task and bucket and a
/// different base image.
pub fn select_prompt_entry(manifest: &CorpusManifest, task: &TaskSpec, exclude_base_id: &str, seed: u64) -> Result<usize> {
    let pool: Vec<usize> = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.task.task_id() == task.task_id()
                && e.task.severity_bucket() == task.severity_bucket()
                && e.base_id != exclude_base_id
        })
        .map(|(i, _)| i)
        .collect();
    pick(&pool, task, exclude_base_id, seed)
}

fn pick(pool: &[usize], task: &TaskSpec, exclude_base_id: &str, seed: u64) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::InsufficientPromptPool {
            task: task.task_id().to_string(),
            bucket: task.severity_bucket(),
            detail: format!("no entry with a base image other than '{exclude_base_id}'"),
        });
    }
    Ok(pool[seed::rng(seed).gen_range(0..pool.len())])
}

/// A corpus with every image pair held in memory.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: CorpusManifest,
    pub samples: Vec<SamplePair>,
    pools: BTreeMap<(TaskId, u8), Vec<usize>>,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest = read_manifest(root)?;
        let samples = manifest
            .entries
            .iter()
            .map(|e| {
                Ok(SamplePair {
                    input: Image::load(root.join(&e.input))?,
                    target: Image::load(root.join(&e.target))?,
                    task: e.task.clone(),
                    seed: e.seed,
                    base_id: e.base_id.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(root.to_path_buf(), manifest, samples))
    }

    pub fn from_parts(root: PathBuf, manifest: CorpusManifest, samples: Vec<SamplePair>) -> Self {
        let mut pools: BTreeMap<(TaskId, u8), Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            pools.entry((s.task.task_id(), s.task.severity_bucket())).or_default().push(i);
        }
        Self { root, manifest, samples, pools }
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        self.manifest.tasks()
    }

    pub fn indices_for(&self, task: TaskId) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.samples[i].task.task_id() == task).collect()
    }

    /// Same contract as [`select_prompt_entry`], using the in-memory pools.
    pub fn select_prompt(&self, task: &TaskSpec, exclude_base_id: &str, seed: u64) -> Result<usize> {
        let pool: Vec<usize> = self
            .pools
            .get(&(task.task_id(), task.severity_bucket()))
            .map(|v| v.iter().copied().filter(|&i| self.samples[i].base_id != exclude_base_id).collect())
            .unwrap_or_default();
        pick(&pool, task, exclude_base_id, seed)
    }

    pub fn sample_prompt_pair(&self, task: &TaskSpec, exclude_base_id: &str, seed: u64) -> Result<PromptPair> {
        Ok(self.samples[self.select_prompt(task, exclude_base_id, seed)?].clone().into())
    }
}
