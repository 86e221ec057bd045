use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::protocol::Stability;
use crate::error::{Error, Result};
use crate::synth::TaskId;

pub const REPORT_VERSION: &str = "vpip-report/1";

/// Serde helpers writing non-finite floats as the strings "inf", "-inf"
/// and "nan".
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_text(v: f64) -> String {
        if v.is_nan() {
            "nan".into()
        } else if v.is_infinite() {
            if v > 0.0 { "inf" } else { "-inf" }.into()
        } else {
            format!("{v:?}")
        }
    }

    pub fn from_text(s: &str) -> Option<f64> {
        match s {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => s.parse().ok(),
        }
    }

    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub(crate) fn decode<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => from_text(&s).ok_or_else(|| serde::de::Error::custom(format!("bad number '{s}'"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&to_text(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(d)
    }
}

pub mod float_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::float::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(deserialize_with = "super::float::decode")] f64);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

pub mod float_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_finite() {
                seq.serialize_element(x)?;
            } else {
                seq.serialize_element(&super::float::to_text(*x))?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(deserialize_with = "super::float::decode")] f64);
        Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: TaskId,
    pub n: usize,
    #[serde(with = "float_opt")]
    pub psnr_mean: Option<f64>,
    #[serde(with = "float_opt")]
    pub ssim_mean: Option<f64>,
    #[serde(with = "float_opt")]
    pub mae_mean: Option<f64>,
    #[serde(with = "float")]
    pub prompt_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchReport {
    pub prompt_task: TaskId,
    #[serde(with = "float_vec")]
    pub psnr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub version: String,
    pub model_id: String,
    #[serde(default)]
    pub config: serde_json::Value,
    pub records: Vec<TaskRecord>,
    #[serde(default)]
    pub stability: Option<Stability>,
    #[serde(default)]
    pub mismatch: Option<MismatchReport>,
}

const CSV_HEADER: &str = "task_id,n,psnr_mean,ssim_mean,mae_mean,prompt_std";

impl EvalReport {
    pub fn new(model_id: String, records: Vec<TaskRecord>) -> Self {
        Self {
            version: REPORT_VERSION.into(),
            model_id,
            config: serde_json::Value::Null,
            records,
            stability: None,
            mismatch: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(s)?;
        if r.version != REPORT_VERSION {
            return Err(Error::InvalidParam(format!("unsupported report version '{}'", r.version)));
        }
        Ok(r)
    }

    /// One row per task; absent metrics are empty cells.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(float::to_text).unwrap_or_default();
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.task_id,
                r.n,
                cell(r.psnr_mean),
                cell(r.ssim_mean),
                cell(r.mae_mean),
                float::to_text(r.prompt_std)
            );
        }
        out
    }

    pub fn records_from_csv(text: &str) -> Result<Vec<TaskRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::InvalidParam("unexpected report CSV header".into()));
        }
        let bad = |l: &str| Error::InvalidParam(format!("malformed report row '{l}'"));
        lines
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 6 {
                    return Err(bad(l));
                }
                let opt = |s: &str| -> Result<Option<f64>> {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        float::from_text(s).map(Some).ok_or_else(|| bad(l))
                    }
                };
                Ok(TaskRecord {
                    task_id: f[0].parse()?,
                    n: f[1].parse().map_err(|_| bad(l))?,
                    psnr_mean: opt(f[2])?,
                    ssim_mean: opt(f[3])?,
                    mae_mean: opt(f[4])?,
                    prompt_std: float::from_text(f[5]).ok_or_else(|| bad(l))?,
                })
            })
            .collect()
    }

    pub fn record(&self, task: TaskId) -> Option<&TaskRecord> {
        self.records.iter().find(|r| r.task_id == task)
    }
}
