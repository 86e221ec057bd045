use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use vpip_autograd::Tensor;

use super::config::ModelConfig;
use super::weights::Weights;
use crate::error::{io_err, Error, Result};
use crate::fsutil;

pub const CKPT_FORMAT: &str = "vpip-ckpt/1";
const M_PREFIX: &str = "optim.m.";
const V_PREFIX: &str = "optim.v.";
const EXTRA_PREFIX: &str = "extra.";

/// Adaptive-moment optimizer state, one tensor per trainable weight.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Moments {
    pub m: Weights,
    pub v: Weights,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: Weights,
    pub step: u64,
    pub moments: Option<Moments>,
    /// Free-form string metadata.
    pub extra: BTreeMap<String, String>,
}

/// Rewrites the JSON header with sorted keys so that equal checkpoints are
/// byte-identical; the metadata map is otherwise emitted in hash order.
fn canonical_header(mut bytes: Vec<u8>) -> Result<Vec<u8>> {
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8-byte prefix")) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + n])?;
    let mut sorted = serde_json::to_vec(&header)?;
    if sorted.len() > n {
        return Err(Error::Checkpoint("header grew while sorting".into()));
    }
    sorted.resize(n, b' ');
    bytes[8..8 + n].copy_from_slice(&sorted);
    Ok(bytes)
}

fn le_bytes(t: &Tensor<f32>) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

impl Checkpoint {
    pub fn new(config: ModelConfig, weights: Weights) -> Self {
        Self { config, weights, step: 0, moments: None, extra: BTreeMap::new() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut named: Vec<(String, &Tensor<f32>)> = self.weights.iter().map(|(k, v)| (k.to_string(), v)).collect();
        if let Some(mo) = &self.moments {
            named.extend(mo.m.iter().map(|(k, v)| (format!("{M_PREFIX}{k}"), v)));
            named.extend(mo.v.iter().map(|(k, v)| (format!("{V_PREFIX}{k}"), v)));
        }
        let bytes: Vec<(String, Vec<u8>, Vec<usize>)> =
            named.into_iter().map(|(k, t)| (k, le_bytes(t), t.shape().to_vec())).collect();
        let views = bytes
            .iter()
            .map(|(k, b, shape)| Ok((k.clone(), TensorView::new(Dtype::F32, shape.clone(), b).map_err(ckpt_err)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut meta = HashMap::new();
        meta.insert("format".to_string(), CKPT_FORMAT.to_string());
        meta.insert("config".to_string(), serde_json::to_string(&self.config)?);
        meta.insert("step".to_string(), self.step.to_string());
        meta.insert("has_moments".to_string(), self.moments.is_some().to_string());
        for (k, v) in &self.extra {
            meta.insert(format!("{EXTRA_PREFIX}{k}"), v.clone());
        }
        let bytes = safetensors::serialize(views, &Some(meta)).map_err(ckpt_err)?;
        canonical_header(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, header) = SafeTensors::read_metadata(bytes).map_err(ckpt_err)?;
        let meta = header.metadata().clone().unwrap_or_default();
        let field = |k: &str| meta.get(k).ok_or_else(|| Error::Checkpoint(format!("missing metadata field '{k}'")));
        if field("format")? != CKPT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported checkpoint format '{}'", field("format")?)));
        }
        let config: ModelConfig = serde_json::from_str(field("config")?)?;
        config.validate()?;
        let step = field("step")?.parse().map_err(|_| Error::Checkpoint("bad step".into()))?;
        let has_moments = field("has_moments")? == "true";
        let extra = meta
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(EXTRA_PREFIX).map(|k| (k.to_string(), v.clone())))
            .collect();
        let st = SafeTensors::deserialize(bytes).map_err(ckpt_err)?;
        let (mut weights, mut m, mut v) = (Weights::default(), Weights::default(), Weights::default());
        for (name, view) in st.tensors() {
            if view.dtype() != Dtype::F32 {
                return Err(Error::Checkpoint(format!("{name}: expected f32, found {:?}", view.dtype())));
            }
            let data: Vec<f32> =
                view.data().chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            let t = Tensor::new(view.shape(), data);
            if let Some(k) = name.strip_prefix(M_PREFIX) {
                m.insert(k, t);
            } else if let Some(k) = name.strip_prefix(V_PREFIX) {
                v.insert(k, t);
            } else {
                weights.insert(name, t);
            }
        }
        let ckpt = Self { config, weights, step, moments: has_moments.then_some(Moments { m, v }), extra };
        ckpt.check_against_config()?;
        Ok(ckpt)
    }

    /// Verifies that the weights are exactly the parameter set of `config`.
    pub fn check_against_config(&self) -> Result<()> {
        let specs = super::param_specs(&self.config);
        if specs.len() != self.weights.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, config expects {}",
                self.weights.len(),
                specs.len()
            )));
        }
        for s in specs {
            match self.weights.get(&s.name) {
                Some(t) if t.shape() == s.shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Checkpoint(format!("{}: shape {:?}, expected {:?}", s.name, t.shape(), s.shape)))
                }
                None => return Err(Error::Checkpoint(format!("missing tensor {}", s.name))),
            }
        }
        if !self.weights.all_finite() {
            return Err(Error::Checkpoint("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn ckpt_err(e: safetensors::SafeTensorError) -> Error {
    Error::Checkpoint(e.to_string())
}
