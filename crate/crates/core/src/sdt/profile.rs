use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Frame, SdtError, SdtModel, SiteActivity};

/// Profiled activation sites of an encoder layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    QOut,
    KOut,
    VOut,
    /// Attention spikes after mask-and-add.
    SdsaOut,
    /// Encoder block output.
    MlpOut,
}

impl Site {
    pub const ALL: [Site; 5] = [Site::QOut, Site::KOut, Site::VOut, Site::SdsaOut, Site::MlpOut];

    pub fn name(self) -> &'static str {
        match self {
            Site::QOut => "q_out",
            Site::KOut => "k_out",
            Site::VOut => "v_out",
            Site::SdsaOut => "sdsa_out",
            Site::MlpOut => "mlp_out",
        }
    }
}

impl std::str::FromStr for Site {
    type Err = SdtError;

    fn from_str(s: &str) -> Result<Self, SdtError> {
        Site::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| SdtError::Profile(format!("unknown site `{s}`")))
    }
}

/// Mean firing rate per layer and site over a profiling set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiringRateProfile {
    /// `rates[layer][site]` in [`Site::ALL`] order.
    pub rates: Vec<[f64; 5]>,
    pub embed: f64,
    pub samples: usize,
}

fn ratio((ones, total): (u64, u64)) -> f64 {
    if total == 0 {
        0.0
    } else {
        ones as f64 / total as f64
    }
}

impl FiringRateProfile {
    pub fn from_activity(activity: &SiteActivity, samples: usize) -> Self {
        Self {
            rates: activity.layers.iter().map(|l| l.map(ratio)).collect(),
            embed: ratio(activity.embed),
            samples,
        }
    }

    pub fn layers(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, layer: usize, site: Site) -> f64 {
        self.rates[layer][site as usize]
    }

    pub fn sdsa_out(&self) -> Vec<f64> {
        self.rates.iter().map(|r| r[Site::SdsaOut as usize]).collect()
    }

    /// `layer,site,rate` with 1-based layers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,site,rate\n");
        for (l, rates) in self.rates.iter().enumerate() {
            for site in Site::ALL {
                out.push_str(&format!("{},{},{}\n", l + 1, site.name(), rates[site as usize]));
            }
        }
        out
    }

    pub fn from_csv(text: &str, samples: usize) -> Result<Self, SdtError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rates: Vec<[Option<f64>; 5]> = Vec::new();
        for (i, rec) in rdr.deserialize::<(usize, String, f64)>().enumerate() {
            let (layer, site, rate) = rec.map_err(|e| SdtError::Profile(format!("row {}: {e}", i + 1)))?;
            let site: Site = site.parse()?;
            if layer == 0 || !(0.0..=1.0).contains(&rate) {
                return Err(SdtError::Profile(format!("row {}: invalid layer {layer} or rate {rate}", i + 1)));
            }
            if rates.len() < layer {
                rates.resize(layer, [None; 5]);
            }
            rates[layer - 1][site as usize] = Some(rate);
        }
        let rates = rates
            .into_iter()
            .enumerate()
            .map(|(l, r)| {
                let mut full = [0.0; 5];
                for (s, v) in r.iter().enumerate() {
                    full[s] = v.ok_or_else(|| {
                        SdtError::Profile(format!("layer {} has no {} rate", l + 1, Site::ALL[s].name()))
                    })?;
                }
                Ok(full)
            })
            .collect::<Result<Vec<_>, SdtError>>()?;
        Ok(Self { rates, embed: 0.0, samples })
    }
}

/// Runs every sample through the unpruned model for all timesteps and
/// averages firing rates over samples and timesteps. Spike counts are
/// summed as integers, so the result does not depend on scheduling.
pub fn profile_firing_rates(model: &SdtModel, samples: &[Vec<Frame>]) -> Result<FiringRateProfile, SdtError> {
    if samples.is_empty() {
        return Err(SdtError::Profile("empty profiling set".into()));
    }
    let cfg = model.config();
    let mask = vec![false; cfg.depth];
    let parts = samples
        .par_iter()
        .map(|frames| model.forward(frames, &mask, cfg.timesteps).map(|r| r.sites))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = SiteActivity::new(cfg.depth);
    for p in &parts {
        total.merge(p);
    }
    Ok(FiringRateProfile::from_activity(&total, samples.len()))
}
