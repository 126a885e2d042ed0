use serde::{Deserialize, Serialize};

use super::{SdtConfig, SdtError};

/// One timestep of integer input, `channels x height x width`, values
/// indexed `(c * height + y) * width + x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0; channels * height * width] }
    }

    pub fn for_config(cfg: &SdtConfig) -> Self {
        Self::zeros(cfg.in_channels, cfg.image_height, cfg.image_width)
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: u8) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn check(&self, cfg: &SdtConfig) -> Result<(), SdtError> {
        if (self.channels, self.height, self.width) != (cfg.in_channels, cfg.image_height, cfg.image_width)
            || self.data.len() != self.channels * self.height * self.width
        {
            return Err(SdtError::Shape(format!(
                "frame {}x{}x{} does not match {}x{}x{}",
                self.channels, self.height, self.width, cfg.in_channels, cfg.image_height, cfg.image_width
            )));
        }
        let limit = 1u16 << cfg.input_bits;
        if let Some(v) = self.data.iter().find(|&&v| u16::from(v) >= limit) {
            return Err(SdtError::Shape(format!("pixel value {v} exceeds {}-bit input", cfg.input_bits)));
        }
        Ok(())
    }

    /// Patch vector of token `n`. Tokens run over patches row-major; inside
    /// a patch the index is `c * p * p + dy * p + dx`.
    pub fn patch(&self, n: usize, p: usize) -> Vec<u8> {
        let per_row = self.width / p;
        let (py, px) = (n / per_row, n % per_row);
        let mut out = Vec::with_capacity(self.channels * p * p);
        for c in 0..self.channels {
            for dy in 0..p {
                for dx in 0..p {
                    out.push(self.get(c, py * p + dy, px * p + dx));
                }
            }
        }
        out
    }
}

/// Labelled input: one frame per timestep, or a single repeated frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub frames: Vec<Frame>,
    pub label: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patch_layout() {
        let mut f = Frame::zeros(2, 4, 4);
        f.set(1, 2, 3, 7);
        // token 3 is the bottom-right 2x2 patch; (c=1, dy=0, dx=1)
        let p = f.patch(3, 2);
        assert_eq!(p.len(), 8);
        assert_eq!(p[4 + 1], 7);
        assert_eq!(p.iter().filter(|&&v| v != 0).count(), 1);
    }

    #[test]
    fn check_range() {
        let cfg = SdtConfig { input_bits: 2, ..SdtConfig::default() };
        let mut f = Frame::for_config(&cfg);
        f.check(&cfg).unwrap();
        f.data[0] = 4;
        assert!(f.check(&cfg).is_err());
    }
}
