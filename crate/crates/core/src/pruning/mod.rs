//! Runtime pruning: static SDSA layer skipping from profiled firing rates
//! (TAFT, threshold `tau`) and confidence-based timestep early exit (CBET,
//! threshold `beta`).

mod exit;
mod records;

pub use exit::{
    combined_infer, early_exit_infer, evaluate, exit_step, ConfidenceTrace, EvaluatedSample, Evaluation,
    InferOutcome,
};
pub use records::{class_summary, records_to_csv, summary_to_csv, ClassSummary, ExitRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hw_cost::CostError;
use crate::sdt::{FiringRateProfile, SdtError};

#[derive(Debug, Error)]
pub enum PruningError {
    #[error("invalid threshold: {0}")]
    Threshold(String),
    #[error("profile covers {got} layers, model has {expected}")]
    ProfileLayers { expected: usize, got: usize },
    #[error("confidence needs at least 2 finite logits: {0}")]
    Logits(String),
    #[error("empty evaluation set")]
    EmptySet,
    #[error(transparent)]
    Model(#[from] SdtError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceMetric {
    #[default]
    MaxSoftmax,
    NormalizedEntropy,
}

/// A (tau, beta) candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub tau: f64,
    pub beta: f64,
    #[serde(default)]
    pub metric: ConfidenceMetric,
}

impl ThresholdConfig {
    pub fn new(tau: f64, beta: f64) -> Self {
        Self { tau, beta, metric: ConfidenceMetric::MaxSoftmax }
    }

    /// `tau` may exceed 1 so that layers firing at rate 1 can be skipped.
    pub fn validate(&self) -> Result<(), PruningError> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(PruningError::Threshold(format!("tau = {} must be finite and >= 0", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(PruningError::Threshold(format!("beta = {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// The search box `[tau_min, tau_max] x [beta_min, beta_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBounds {
    pub tau: (f64, f64),
    pub beta: (f64, f64),
}

impl Default for ThresholdBounds {
    fn default() -> Self {
        Self { tau: (0.0, 1.0), beta: (0.0, 1.0) }
    }
}

impl ThresholdBounds {
    pub fn validate(&self) -> Result<(), PruningError> {
        let (t0, t1) = self.tau;
        let (b0, b1) = self.beta;
        if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1) {
            return Err(PruningError::Threshold(format!("tau bounds ({t0}, {t1}) do not form an interval")));
        }
        if !(0.0 <= b0 && b0 < b1 && b1 <= 1.0) {
            return Err(PruningError::Threshold(format!("beta bounds ({b0}, {b1}) not a sub-interval of [0, 1]")));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &ThresholdConfig) -> bool {
        (self.tau.0..=self.tau.1).contains(&theta.tau) && (self.beta.0..=self.beta.1).contains(&theta.beta)
    }
}

/// `mask[l]` is set iff the profiled attention firing rate of layer `l` is
/// strictly below `tau`.
pub fn select_skipped_layers(profile: &FiringRateProfile, tau: f64, layers: usize) -> Result<Vec<bool>, PruningError> {
    if profile.layers() != layers {
        return Err(PruningError::ProfileLayers { expected: layers, got: profile.layers() });
    }
    if tau.is_nan() {
        return Err(PruningError::Threshold("tau is NaN".into()));
    }
    Ok(profile.sdsa_out().into_iter().map(|r| r < tau).collect())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Confidence in `[0, 1]`; higher is more confident for both metrics.
pub fn confidence(logits: &[f64], metric: ConfidenceMetric) -> Result<f64, PruningError> {
    if logits.len() < 2 {
        return Err(PruningError::Logits(format!("{} classes", logits.len())));
    }
    if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
        return Err(PruningError::Logits(format!("non-finite logit {v}")));
    }
    let p = softmax(logits);
    let score = match metric {
        ConfidenceMetric::MaxSoftmax => p.iter().copied().fold(0.0, f64::max),
        ConfidenceMetric::NormalizedEntropy => {
            let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
            1.0 - h / (logits.len() as f64).ln()
        }
    };
    Ok(score.clamp(0.0, 1.0))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(rates: &[f64]) -> FiringRateProfile {
        FiringRateProfile { rates: rates.iter().map(|&r| [0.3, 0.3, 0.3, r, 0.3]).collect(), embed: 0.3, samples: 1 }
    }

    #[test]
    fn taft_boundaries() {
        let p = profile(&[0.2, 0.15, 0.1, 0.07, 0.05, 0.04, 0.03, 0.02]);
        assert_eq!(select_skipped_layers(&p, 0.0, 8).unwrap(), vec![false; 8]);
        assert_eq!(select_skipped_layers(&p, 1.0 + 1e-9, 8).unwrap(), vec![true; 8]);
        let mask = select_skipped_layers(&p, 0.06, 8).unwrap();
        assert_eq!(mask, [false, false, false, false, true, true, true, true]);
        assert!(select_skipped_layers(&p, 0.06, 7).is_err());
    }

    #[test]
    fn confidence_examples() {
        let uniform = [0.0; 10];
        assert!((confidence(&uniform, ConfidenceMetric::MaxSoftmax).unwrap() - 0.1).abs() < 1e-15);
        assert!(confidence(&uniform, ConfidenceMetric::NormalizedEntropy).unwrap().abs() < 1e-12);
        let mut peaked = [0.0; 10];
        peaked[0] = 5.0;
        let want = 5f64.exp() / (5f64.exp() + 9.0);
        let got = confidence(&peaked, ConfidenceMetric::MaxSoftmax).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.9428).abs() < 1e-4);
        let pair = confidence(&[5.0, 0.0], ConfidenceMetric::MaxSoftmax).unwrap();
        assert!((pair - 0.99331).abs() < 1e-5);
        assert!(confidence(&[1.0], ConfidenceMetric::MaxSoftmax).is_err());
        assert!(confidence(&[1.0, f64::NAN], ConfidenceMetric::MaxSoftmax).is_err());
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn threshold_validation() {
        assert!(ThresholdConfig::new(-0.1, 0.5).validate().is_err());
        assert!(ThresholdConfig::new(0.1, 1.5).validate().is_err());
        ThresholdConfig::new(1.01, 1.0).validate().unwrap();
        assert!(ThresholdBounds { tau: (0.5, 0.5), beta: (0.0, 1.0) }.validate().is_err());
        ThresholdBounds::default().validate().unwrap();
    }

    proptest! {
        #[test]
        fn shift_invariance(logits in prop::collection::vec(-20.0f64..20.0, 2..12), shift in -50.0f64..50.0) {
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            for metric in [ConfidenceMetric::MaxSoftmax, ConfidenceMetric::NormalizedEntropy] {
                let a = confidence(&logits, metric).unwrap();
                let b = confidence(&shifted, metric).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn mask_nesting(rates in prop::collection::vec(0.0f64..1.0, 1..10), t1 in 0.0f64..1.1, t2 in 0.0f64..1.1) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p = profile(&rates);
            let a = select_skipped_layers(&p, lo, rates.len()).unwrap();
            let b = select_skipped_layers(&p, hi, rates.len()).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
        }
    }
}
