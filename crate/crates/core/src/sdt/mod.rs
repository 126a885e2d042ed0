//! Functional Spike-Driven Transformer: bit-serial patch embedding, encoder
//! blocks of mask-and-add attention and a spiking MLP, and a temporally
//! averaged classification head.
//!
//! Membrane currents are raw fixed-point units: one int8 weight unit is
//! 1/256 of the membrane scale, so a threshold of 1.0 is crossed by a
//! summed weight of 256.

mod blocks;
mod calibrate;
mod config;
mod frame;
mod model;
mod profile;
mod weights;

pub use blocks::{
    fire, linear_currents, mask_and_add, mlp_block, patch_embed, sdsa_block, spiking_linear, spiking_linear_residual,
    EmbedStats, MlpState, SdsaOutput, SdsaState, SPIKE_CURRENT,
};
pub use calibrate::{calibrate_head, head_features};
pub use config::SdtConfig;
pub use frame::{Frame, Sample};
pub use model::{ForwardResult, LogitTrace, SdtModel, Session, SiteActivity};
pub(crate) use model::frame_at;
pub use profile::{profile_firing_rates, FiringRateProfile, Site};
pub use weights::{LayerWeights, Matrix, SdtWeights};

use thiserror::Error;

use crate::spike::SpikeError;

#[derive(Debug, Error)]
pub enum SdtError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("skip mask has {got} entries for a {expected}-layer model")]
    MaskLength { expected: usize, got: usize },
    #[error("timestep cap {cap} outside 1..={timesteps}")]
    TimestepCap { cap: usize, timesteps: usize },
    #[error("weight file: {0}")]
    WeightFile(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Spike(#[from] SpikeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
