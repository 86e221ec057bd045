use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_prompt_res_blocks() -> usize {
    4
}

/// Architecture hyperparameters. Vectors hold one entry per pyramid level,
/// finest first; the last level is the bottleneck.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub num_blocks: Vec<usize>,
    pub channels: Vec<usize>,
    pub heads: Vec<usize>,
    pub prompt_channels: usize,
    /// Residual blocks per prompt-encoder downsampling level.
    #[serde(default = "default_prompt_res_blocks")]
    pub prompt_res_blocks: usize,
    pub window_size: usize,
    pub image_size: usize,
}

impl ModelConfig {
    pub fn levels(&self) -> usize {
        self.channels.len()
    }

    pub fn bottleneck(&self) -> usize {
        self.levels() - 1
    }

    /// Total downsampling factor between the input and the bottleneck.
    pub fn reduction(&self) -> usize {
        1 << self.bottleneck()
    }

    pub fn latent_size(&self) -> usize {
        self.image_size / self.reduction()
    }

    pub fn head_dim(&self, level: usize) -> usize {
        self.channels[level] / self.heads[level]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let l = self.channels.len();
        if l < 2 {
            return bad(format!("need at least 2 levels, got {l}"));
        }
        if self.num_blocks.len() != l || self.heads.len() != l {
            return bad(format!(
                "num_blocks ({}), channels ({l}) and heads ({}) must have one entry per level",
                self.num_blocks.len(),
                self.heads.len()
            ));
        }
        if self.channels[0] == 0 || self.channels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("channels must be strictly increasing, got {:?}", self.channels));
        }
        for i in 0..l {
            if self.heads[i] == 0 || self.channels[i] % self.heads[i] != 0 {
                return bad(format!(
                    "channels[{i}] = {} is not divisible by heads[{i}] = {}",
                    self.channels[i], self.heads[i]
                ));
            }
            if self.num_blocks[i] == 0 {
                return bad(format!("num_blocks[{i}] must be >= 1"));
            }
        }
        if self.prompt_channels == 0 {
            return bad("prompt_channels must be >= 1".into());
        }
        let r = self.reduction();
        if self.image_size == 0 || self.image_size % r != 0 {
            return bad(format!("image_size {} is not divisible by {r}", self.image_size));
        }
        if self.window_size == 0 || self.latent_size() % self.window_size != 0 {
            return bad(format!(
                "window_size {} does not divide image_size/{r} = {}",
                self.window_size,
                self.latent_size()
            ));
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<Self> {
        let cfg = |blocks: &[usize], channels: &[usize], prompt: usize, window: usize, image: usize| ModelConfig {
            num_blocks: blocks.to_vec(),
            channels: channels.to_vec(),
            heads: vec![1, 2, 4, 8],
            prompt_channels: prompt,
            prompt_res_blocks: 4,
            window_size: window,
            image_size: image,
        };
        Ok(match name {
            "tiny" => cfg(&[1, 1, 1, 1], &[8, 16, 32, 64], 8, 4, 32),
            "desk_base" => cfg(&[1, 1, 1, 1], &[16, 32, 64, 128], 16, 8, 64),
            "desk_large" => cfg(&[1, 2, 2, 2], &[24, 48, 96, 192], 24, 8, 64),
            "desk_huge" => cfg(&[2, 2, 2, 3], &[32, 64, 128, 256], 24, 8, 64),
            "paper_base" => cfg(&[2, 4, 4, 4], &[48, 96, 192, 384], 32, 8, 256),
            "paper_large" => cfg(&[4, 6, 6, 8], &[64, 128, 256, 512], 64, 8, 256),
            "paper_huge" => cfg(&[6, 8, 8, 12], &[80, 160, 320, 640], 64, 8, 256),
            _ => return Err(Error::InvalidConfig(format!("unknown model preset '{name}'"))),
        })
    }

    pub const PRESETS: &'static [&'static str] =
        &["tiny", "desk_base", "desk_large", "desk_huge", "paper_base", "paper_large", "paper_huge"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in ModelConfig::PRESETS {
            ModelConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ModelConfig::preset("giant").is_err());
    }

    #[test]
    fn violations_are_named() {
        let base = ModelConfig::preset("tiny").unwrap();
        let msg = |c: ModelConfig| c.validate().unwrap_err().to_string();
        assert!(msg(ModelConfig { channels: vec![8, 8, 32, 64], ..base.clone() }).contains("strictly increasing"));
        assert!(msg(ModelConfig { heads: vec![1, 3, 4, 8], ..base.clone() }).contains("divisible by heads"));
        assert!(msg(ModelConfig { image_size: 36, ..base.clone() }).contains("not divisible by 8"));
        assert!(msg(ModelConfig { window_size: 3, ..base.clone() }).contains("window_size"));
        assert!(msg(ModelConfig { channels: vec![8], heads: vec![1], num_blocks: vec![1], ..base }).contains("2 levels"));
    }
}
