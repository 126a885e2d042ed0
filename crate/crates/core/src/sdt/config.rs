use serde::{Deserialize, Serialize};

use super::SdtError;
use crate::spike::Fixed;

/// Shape and neuron parameters of a Spike-Driven Transformer.
///
/// Inputs are `in_channels x image_height x image_width` frames of
/// `input_bits`-bit integers cut into square `patch_size` patches; the
/// token count is the number of patches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdtConfig {
    pub depth: usize,
    pub dim: usize,
    pub heads: usize,
    pub timesteps: usize,
    pub classes: usize,
    pub seed: u64,
    pub in_channels: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub patch_size: usize,
    pub input_bits: u8,
    pub mlp_ratio: usize,
    pub threshold: f64,
    pub leak: f64,
    /// Threshold of the attention mask neurons, in spike counts.
    pub attn_threshold: f64,
}

impl Default for SdtConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            dim: 32,
            heads: 2,
            timesteps: 4,
            classes: 10,
            seed: 0xA57E,
            in_channels: 2,
            image_height: 16,
            image_width: 16,
            patch_size: 4,
            input_bits: 4,
            mlp_ratio: 4,
            threshold: 1.0,
            leak: 1.0,
            attn_threshold: 1.0,
        }
    }
}

impl SdtConfig {
    /// 2 layers, 256 channels, 8 heads, 16 timesteps.
    pub fn sdt_2_256() -> Self {
        Self { depth: 2, dim: 256, heads: 8, timesteps: 16, ..Self::default() }
    }

    /// 8 layers, 512 channels, 8 heads, 4 timesteps.
    pub fn sdt_8_512() -> Self {
        Self { depth: 8, dim: 512, heads: 8, timesteps: 4, ..Self::default() }
    }

    pub fn tokens(&self) -> usize {
        (self.image_height / self.patch_size) * (self.image_width / self.patch_size)
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.patch_size * self.patch_size
    }

    pub fn hidden(&self) -> usize {
        self.dim * self.mlp_ratio
    }

    pub fn threshold_fixed(&self) -> Fixed {
        Fixed::from_f64(self.threshold).expect("validated threshold")
    }

    pub fn leak_fixed(&self) -> Fixed {
        Fixed::from_f64(self.leak).expect("validated leak")
    }

    pub fn attn_threshold_fixed(&self) -> Fixed {
        Fixed::from_f64(self.attn_threshold).expect("validated threshold")
    }

    pub fn validate(&self) -> Result<(), SdtError> {
        let bad = |msg: String| Err(SdtError::Config(msg));
        for (name, v) in [
            ("depth", self.depth),
            ("dim", self.dim),
            ("heads", self.heads),
            ("timesteps", self.timesteps),
            ("classes", self.classes),
            ("in_channels", self.in_channels),
            ("patch_size", self.patch_size),
            ("mlp_ratio", self.mlp_ratio),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.dim % self.heads != 0 {
            return bad(format!("dim {} not divisible by heads {}", self.dim, self.heads));
        }
        if self.image_height % self.patch_size != 0 || self.image_width % self.patch_size != 0 || self.tokens() == 0 {
            return bad(format!(
                "{}x{} image does not tile into {}x{} patches",
                self.image_height, self.image_width, self.patch_size, self.patch_size
            ));
        }
        if !(1..=8).contains(&self.input_bits) {
            return bad(format!("input_bits {} outside 1..=8", self.input_bits));
        }
        if !(0.0..=1.0).contains(&self.leak) {
            return bad(format!("leak {} outside [0, 1]", self.leak));
        }
        for (name, v) in [("threshold", self.threshold), ("attn_threshold", self.attn_threshold)] {
            if !(v > 0.0) || Fixed::from_f64(v).is_err() {
                return bad(format!("{name} {v} must be a positive fixed-point value"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SdtError> {
        let cfg: SdtConfig = toml::from_str(text).map_err(|e| SdtError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("model config serializes")
    }
}
