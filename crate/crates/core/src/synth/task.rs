use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::*;
use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Restoration,
    Enhancement,
    Stylization,
    FeatureExtraction,
}

/// Which side of a pair carries the clean base image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// input = op(base), target = base
    Degrade,
    /// input = base, target = op(base)
    Transform,
}

macro_rules! tasks {
    ($($variant:ident => $name:literal, $cat:ident, $dir:ident, [$($key:literal),*];)*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum TaskId {
            $($variant,)*
        }

        impl TaskId {
            pub const ALL: &'static [TaskId] = &[$(TaskId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(TaskId::$variant => $name,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(TaskId::$variant => Category::$cat,)*
                }
            }

            pub fn direction(self) -> Direction {
                match self {
                    $(TaskId::$variant => Direction::$dir,)*
                }
            }

            /// Parameter keys a [`TaskSpec`] of this task must carry.
            pub fn param_keys(self) -> &'static [&'static str] {
                match self {
                    $(TaskId::$variant => &[$($key),*],)*
                }
            }
        }
    };
}

tasks! {
    GaussianNoise => "gaussian_noise", Restoration, Degrade, ["sigma"];
    PoissonNoise => "poisson_noise", Restoration, Degrade, ["peak"];
    SaltPepper => "salt_pepper", Restoration, Degrade, ["p"];
    GaussianBlur => "gaussian_blur", Restoration, Degrade, ["sigma"];
    Jpeg => "jpeg", Restoration, Degrade, ["quality"];
    Ringing => "ringing", Restoration, Degrade, ["cutoff"];
    RlArtifact => "rl_artifact", Restoration, Degrade, ["psf_sigma", "iters"];
    Pixelation => "pixelation", Restoration, Degrade, ["factor"];
    Inpainting => "inpainting", Restoration, Degrade, ["coverage"];
    Rain => "rain", Restoration, Degrade, ["density", "angle"];
    LowLight => "low_light", Enhancement, Degrade, ["gamma"];
    BrightnessCorrection => "brightness_correction", Enhancement, Degrade, ["factor"];
    ContrastCorrection => "contrast_correction", Enhancement, Degrade, ["factor"];
    SaturationCorrection => "saturation_correction", Enhancement, Degrade, ["factor"];
    HistEqualize => "hist_equalize", Enhancement, Transform, [];
    ToneCurve => "tone_curve", Enhancement, Transform, ["strength"];
    Pencil => "pencil", Stylization, Transform, ["blur_sigma"];
    Cartoon => "cartoon", Stylization, Transform, ["levels", "smooth_iters"];
    Canny => "canny", FeatureExtraction, Transform, ["low", "high"];
    Laplacian => "laplacian", FeatureExtraction, Transform, [];
}

impl TaskId {
    fn is_integer_key(self, key: &str) -> bool {
        matches!(
            (self, key),
            (TaskId::Jpeg, "quality")
                | (TaskId::RlArtifact, "iters")
                | (TaskId::Pixelation, "factor")
                | (TaskId::Cartoon, "levels")
                | (TaskId::Cartoon, "smooth_iters")
        )
    }

    /// Default severity buckets: one closed interval per parameter key,
    /// ordered mild to severe. Non-parametric and stylistic tasks have one.
    pub fn default_buckets(self) -> Vec<BucketRange> {
        let one = |k: &str, lo: f64, hi: f64| BTreeMap::from([(k.to_string(), [lo, hi])]);
        let three = |k: &str, r: [[f64; 2]; 3]| r.iter().map(|&[lo, hi]| one(k, lo, hi)).collect();
        match self {
            TaskId::GaussianNoise => three("sigma", [[0.05, 0.08], [0.08, 0.11], [0.11, 0.15]]),
            TaskId::PoissonNoise => three("peak", [[200.0, 400.0], [60.0, 200.0], [15.0, 60.0]]),
            TaskId::SaltPepper => three("p", [[0.005, 0.02], [0.02, 0.05], [0.05, 0.1]]),
            TaskId::GaussianBlur => three("sigma", [[0.6, 1.2], [1.2, 2.0], [2.0, 3.0]]),
            TaskId::Jpeg => three("quality", [[60.0, 80.0], [30.0, 59.0], [10.0, 29.0]]),
            TaskId::Ringing => three("cutoff", [[0.5, 0.7], [0.35, 0.5], [0.2, 0.35]]),
            TaskId::RlArtifact => [[1.0, 1.5, 10.0, 20.0], [1.5, 2.0, 20.0, 35.0], [2.0, 2.5, 35.0, 50.0]]
                .iter()
                .map(|&[a, b, c, d]| BTreeMap::from([("psf_sigma".into(), [a, b]), ("iters".into(), [c, d])]))
                .collect(),
            TaskId::Pixelation => three("factor", [[2.0, 2.0], [3.0, 4.0], [5.0, 8.0]]),
            TaskId::Inpainting => three("coverage", [[0.02, 0.05], [0.05, 0.1], [0.1, 0.2]]),
            TaskId::Rain => [[0.5, 1.0], [1.0, 2.0], [2.0, 4.0]]
                .iter()
                .map(|&[lo, hi]| BTreeMap::from([("density".into(), [lo, hi]), ("angle".into(), [-20.0, 20.0])]))
                .collect(),
            TaskId::LowLight => three("gamma", [[1.5, 2.0], [2.0, 2.5], [2.5, 3.2]]),
            TaskId::BrightnessCorrection | TaskId::ContrastCorrection => {
                three("factor", [[0.7, 0.85], [0.5, 0.7], [0.3, 0.5]])
            }
            TaskId::SaturationCorrection => three("factor", [[0.6, 0.8], [0.3, 0.6], [0.0, 0.3]]),
            TaskId::HistEqualize | TaskId::Laplacian => vec![BTreeMap::new()],
            TaskId::ToneCurve => three("strength", [[0.3, 0.5], [0.5, 0.7], [0.7, 0.9]]),
            TaskId::Pencil => vec![one("blur_sigma", 2.0, 4.0)],
            TaskId::Cartoon => {
                vec![BTreeMap::from([("levels".into(), [5.0, 8.0]), ("smooth_iters".into(), [1.0, 2.0])])]
            }
            TaskId::Canny => vec![BTreeMap::from([("low".into(), [0.04, 0.04]), ("high".into(), [0.1, 0.1])])],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL.iter().copied().find(|t| t.as_str() == s).ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// Closed interval per parameter key.
pub type BucketRange = BTreeMap<String, [f64; 2]>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub task: TaskId,
    pub buckets: Vec<BucketRange>,
}

impl RosterEntry {
    pub fn with_defaults(task: TaskId) -> Self {
        Self { task, buckets: task.default_buckets() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets.is_empty() || self.buckets.len() > u8::MAX as usize {
            return Err(invalid(format!("{}: needs 1..=255 severity buckets", self.task)));
        }
        for (b, range) in self.buckets.iter().enumerate() {
            let keys: Vec<&str> = range.keys().map(String::as_str).collect();
            let mut want = self.task.param_keys().to_vec();
            want.sort_unstable();
            if keys != want {
                return Err(invalid(format!("{} bucket {b}: keys {keys:?}, expected {want:?}", self.task)));
            }
            for (k, [lo, hi]) in range {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(invalid(format!("{} bucket {b}: bad range for {k}: [{lo}, {hi}]", self.task)));
                }
            }
        }
        Ok(())
    }

    /// Draws a spec uniformly from bucket `bucket`.
    pub fn sample_spec(&self, bucket: u8, seed: u64) -> Result<TaskSpec> {
        let range = self
            .buckets
            .get(bucket as usize)
            .ok_or_else(|| invalid(format!("{} has no severity bucket {bucket}", self.task)))?;
        let mut rng = seed::rng(seed);
        let params = range
            .iter()
            .map(|(k, &[lo, hi])| {
                let v = if self.task.is_integer_key(k) {
                    rng.gen_range(lo.ceil() as i64..=hi.floor() as i64) as f64
                } else if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..=hi)
                };
                (k.clone(), v)
            })
            .collect();
        TaskSpec::new(self.task, params, bucket)
    }
}

/// The full default roster, every task with its default buckets.
pub fn default_roster() -> Vec<RosterEntry> {
    TaskId::ALL.iter().map(|&t| RosterEntry::with_defaults(t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct TaskSpec {
    task_id: TaskId,
    params: BTreeMap<String, f64>,
    severity_bucket: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    task_id: TaskId,
    category: Category,
    params: BTreeMap<String, f64>,
    severity_bucket: u8,
}

impl TryFrom<RawSpec> for TaskSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.category != raw.task_id.category() {
            return Err(invalid(format!("{} is not in category {:?}", raw.task_id, raw.category)));
        }
        TaskSpec::new(raw.task_id, raw.params, raw.severity_bucket)
    }
}

impl From<TaskSpec> for RawSpec {
    fn from(s: TaskSpec) -> Self {
        RawSpec { task_id: s.task_id, category: s.task_id.category(), params: s.params, severity_bucket: s.severity_bucket }
    }
}

impl TaskSpec {
    pub fn new(task_id: TaskId, params: BTreeMap<String, f64>, severity_bucket: u8) -> Result<Self> {
        let mut want = task_id.param_keys().to_vec();
        want.sort_unstable();
        let have: Vec<&str> = params.keys().map(String::as_str).collect();
        if have != want {
            return Err(invalid(format!("{task_id}: parameters {have:?}, expected {want:?}")));
        }
        if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("{task_id}: parameter {k} is not finite ({v})")));
        }
        Ok(Self { task_id, params, severity_bucket })
    }

    /// Convenience constructor from `(key, value)` pairs.
    pub fn with(task_id: TaskId, params: &[(&str, f64)], severity_bucket: u8) -> Result<Self> {
        Self::new(task_id, params.iter().map(|&(k, v)| (k.to_string(), v)).collect(), severity_bucket)
    }

    pub fn task_id(&self) -> TaskId {
        self.task_id
    }

    pub fn category(&self) -> Category {
        self.task_id.category()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn severity_bucket(&self) -> u8 {
        self.severity_bucket
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    fn int_param(&self, key: &str) -> Result<i64> {
        let v = self.param(key);
        if v.fract() != 0.0 {
            return Err(invalid(format!("{}: {key} must be an integer, got {v}", self.task_id)));
        }
        Ok(v as i64)
    }

    fn uint_param(&self, key: &str) -> Result<usize> {
        let v = self.int_param(key)?;
        usize::try_from(v).map_err(|_| invalid(format!("{}: {key} must be >= 0, got {v}", self.task_id)))
    }

    /// Runs the task's operator on `img`.
    pub fn apply(&self, img: &Image, seed: u64) -> Result<Image> {
        let p = |k: &str| self.param(k);
        Ok(match self.task_id {
            TaskId::GaussianNoise => apply_gaussian_noise(img, p("sigma"), seed)?,
            TaskId::PoissonNoise => apply_poisson_noise(img, p("peak"), seed)?,
            TaskId::SaltPepper => apply_salt_pepper(img, p("p"), seed)?,
            TaskId::GaussianBlur => gaussian_blur_auto(img, p("sigma"))?,
            TaskId::Jpeg => {
                let q = self.int_param("quality")?;
                apply_jpeg_like(img, u32::try_from(q).map_err(|_| invalid(format!("jpeg quality {q}")))?)?
            }
            TaskId::Ringing => apply_ringing(img, p("cutoff"))?,
            TaskId::RlArtifact => apply_rl_artifact(img, p("psf_sigma"), self.uint_param("iters")?)?,
            TaskId::Pixelation => apply_pixelation(img, self.uint_param("factor")?)?,
            TaskId::Inpainting => apply_inpaint_mask(img, p("coverage"), seed)?.0,
            TaskId::Rain => apply_rain_streaks(img, p("density"), p("angle"), seed)?,
            TaskId::LowLight => adjust_tone(img, ToneKind::Gamma, p("gamma"))?,
            TaskId::BrightnessCorrection => adjust_tone(img, ToneKind::Brightness, p("factor"))?,
            TaskId::ContrastCorrection => adjust_tone(img, ToneKind::Contrast, p("factor"))?,
            TaskId::SaturationCorrection => adjust_tone(img, ToneKind::Saturation, p("factor"))?,
            TaskId::HistEqualize => hist_equalize(img),
            TaskId::ToneCurve => tone_curve(img, p("strength"))?,
            TaskId::Pencil => stylize_pencil(img, p("blur_sigma"))?,
            TaskId::Cartoon => stylize_cartoon(img, self.uint_param("levels")?, self.uint_param("smooth_iters")?)?,
            TaskId::Canny => edge_canny(img, p("low"), p("high"))?,
            TaskId::Laplacian => edge_laplacian(img),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub input: Image,
    pub target: Image,
    pub task: TaskSpec,
    pub seed: u64,
    pub base_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PromptPair {
    pub source: Image,
    pub target: Image,
    pub task: TaskSpec,
}

impl From<SamplePair> for PromptPair {
    fn from(s: SamplePair) -> Self {
        PromptPair { source: s.input, target: s.target, task: s.task }
    }
}

/// Pairs `base` with its transformed version following the task's
/// direction convention.
pub fn make_sample(task: &TaskSpec, base: &Image, seed: u64, base_id: &str) -> Result<SamplePair> {
    let out = task.apply(base, seed)?;
    let (input, target) = match task.task_id.direction() {
        Direction::Degrade => (out, base.clone()),
        Direction::Transform => (base.clone(), out),
    };
    Ok(SamplePair { input, target, task: task.clone(), seed, base_id: base_id.to_string() })
}
