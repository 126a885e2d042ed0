use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::{bin_events, load_events, EventFormat};
use super::DataError;
use crate::sdt::{Frame, Sample, SdtConfig};

/// Class-prototype generator: every class owns a sparse random frame and
/// samples are per-timestep corruptions of it. Noise grows linearly from
/// `noise_min` (class 0) to `noise_max` (last class).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Fraction of non-zero pixels in a prototype.
    pub density: f64,
    pub noise_min: f64,
    pub noise_max: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { density: 0.25, noise_min: 0.02, noise_max: 0.3, seed: 1 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, v) in [("density", self.density), ("noise_min", self.noise_min), ("noise_max", self.noise_max)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DataError::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.noise_min > self.noise_max {
            return Err(DataError::Config("noise_min exceeds noise_max".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSource {
    spec: SyntheticSpec,
    cfg: SdtConfig,
    prototypes: Vec<Frame>,
}

impl SyntheticSource {
    pub fn new(cfg: &SdtConfig, spec: SyntheticSpec) -> Result<Self, DataError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let max = (1u16 << cfg.input_bits) - 1;
        let prototypes = (0..cfg.classes)
            .map(|_| {
                let mut f = Frame::for_config(cfg);
                for v in f.data.iter_mut() {
                    if rng.gen_bool(spec.density) {
                        *v = rng.gen_range(1..=max) as u8;
                    }
                }
                f
            })
            .collect();
        Ok(Self { spec, cfg: cfg.clone(), prototypes })
    }

    pub fn noise(&self, class: usize) -> f64 {
        let c = self.cfg.classes;
        if c <= 1 {
            return self.spec.noise_min;
        }
        self.spec.noise_min + (self.spec.noise_max - self.spec.noise_min) * class as f64 / (c - 1) as f64
    }

    /// `count` samples with labels cycling through the classes. `stream`
    /// selects an independent draw (e.g. calibration vs evaluation).
    pub fn samples(&self, count: usize, stream: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(stream + 1);
        let max = (1u16 << self.cfg.input_bits) - 1;
        (0..count)
            .map(|i| {
                let label = i % self.cfg.classes;
                let noise = self.noise(label);
                let frames = (0..self.cfg.timesteps)
                    .map(|_| {
                        let mut f = self.prototypes[label].clone();
                        for v in f.data.iter_mut() {
                            if rng.gen_bool(noise) {
                                *v = if rng.gen_bool(self.spec.density) { rng.gen_range(1..=max) as u8 } else { 0 };
                            }
                        }
                        f
                    })
                    .collect();
                Sample { frames, label }
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    path: PathBuf,
    label: usize,
}

/// Loads a `path,label` manifest of event files (paths relative to the
/// manifest) and bins each into `timesteps` frames of the model's input
/// size. The model must take two input channels.
pub fn load_event_dataset(manifest: &Path, cfg: &SdtConfig) -> Result<Vec<Sample>, DataError> {
    if cfg.in_channels != 2 {
        return Err(DataError::Config(format!("event input needs 2 channels, model has {}", cfg.in_channels)));
    }
    let (w, h) = (sensor_dim(cfg.image_width)?, sensor_dim(cfg.image_height)?);
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| DataError::Config(format!("{}: {e}", manifest.display())))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: ManifestRow = row.map_err(|e| DataError::Config(format!("{}: {e}", manifest.display())))?;
        if row.label >= cfg.classes {
            return Err(DataError::Config(format!("label {} with {} classes", row.label, cfg.classes)));
        }
        let path = base.join(&row.path);
        let stream = load_events(&path, EventFormat::from_path(&path), w, h)?;
        out.push(Sample { frames: bin_events(&stream, cfg.timesteps, cfg.input_bits)?, label: row.label });
    }
    Ok(out)
}

fn sensor_dim(v: usize) -> Result<u16, DataError> {
    u16::try_from(v).map_err(|_| DataError::Config(format!("sensor dimension {v} too large")))
}
