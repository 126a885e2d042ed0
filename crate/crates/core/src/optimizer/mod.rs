//! Co-selection of the pruning thresholds: scalarised accuracy/energy
//! objective, Gaussian-process Bayesian optimisation with Expected
//! Improvement, grid and random baselines, Pareto extraction and 2-D
//! hypervolume.

mod bo;
mod campaign;
mod ei;
mod gp;
mod lhs;
mod nelder_mead;
mod pareto;

pub use bo::{bo_loop, bo_loop_observed, grid_search, random_search, BoSettings};
pub use campaign::{comparison_to_csv, load_campaign, pareto_to_csv, save_campaign, MethodSummary};
pub use ei::{expected_improvement, normal_cdf, normal_pdf};
pub use gp::{fit_hyperparameters, gp_fit, gp_predict, GpPosterior, KernelParams};
pub use lhs::lhs_init;
pub use nelder_mead::nelder_mead_max;
pub use pareto::{hypervolume, pareto_front, ParetoFront, DEFAULT_REFERENCE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pruning::ThresholdBounds;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid objective: {0}")]
    Objective(String),
    #[error("invalid search setup: {0}")]
    Setup(String),
    #[error("covariance matrix not positive definite after jitter {0:e}")]
    NotPositiveDefinite(f64),
    #[error("point ({acc}, {e_norm}) does not dominate the reference point")]
    Reference { acc: f64, e_norm: f64 },
    /// The evaluator failed; `history` holds every record completed before.
    #[error("evaluation {index} failed: {message}")]
    Evaluation { index: usize, message: String, history: Vec<EvaluationRecord> },
    #[error("campaign file line {line}: {message}")]
    Campaign { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Accuracy and energy of one threshold pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub accuracy: f64,
    pub energy_uj: f64,
}

/// True objective: maps `(tau, beta)` to a measurement.
pub trait Evaluator {
    fn evaluate(&mut self, tau: f64, beta: f64) -> Result<Measurement, String>;
}

impl<F: FnMut(f64, f64) -> Result<Measurement, String>> Evaluator for F {
    fn evaluate(&mut self, tau: f64, beta: f64) -> Result<Measurement, String> {
        self(tau, beta)
    }
}

/// Weighting, energy normalisation and optional accuracy floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub alpha: f64,
    /// Energy at `(tau_max, beta_min)`.
    pub e_lo: f64,
    /// Baseline energy at `(0, 1)`.
    pub e_hi: f64,
    pub accuracy_floor: Option<f64>,
}

/// Subtracted from `y` when the accuracy floor is violated.
pub const INFEASIBLE_PENALTY: f64 = 10.0;

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(OptimizeError::Objective(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(self.e_hi > self.e_lo) || !self.e_lo.is_finite() || !self.e_hi.is_finite() {
            return Err(OptimizeError::Objective(format!("need e_hi > e_lo, got {} / {}", self.e_hi, self.e_lo)));
        }
        Ok(())
    }

    /// Min-max normalised energy, clamped to `[0, 1]`.
    pub fn normalize(&self, energy: f64) -> f64 {
        ((energy - self.e_lo) / (self.e_hi - self.e_lo)).clamp(0.0, 1.0)
    }

    pub fn record(&self, index: usize, tau: f64, beta: f64, m: Measurement) -> Result<EvaluationRecord, OptimizeError> {
        let e_norm = self.normalize(m.energy_uj);
        let feasible = self.accuracy_floor.is_none_or(|floor| m.accuracy >= floor);
        let mut y = scalar_objective(m.accuracy.clamp(0.0, 1.0), e_norm, self.alpha)?;
        if !feasible {
            y -= INFEASIBLE_PENALTY;
        }
        Ok(EvaluationRecord { index, tau, beta, accuracy: m.accuracy, energy_uj: m.energy_uj, e_norm, y, feasible })
    }
}

/// `y = alpha * acc - (1 - alpha) * e_norm`.
pub fn scalar_objective(acc: f64, e_norm: f64, alpha: f64) -> Result<f64, OptimizeError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(OptimizeError::Objective(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(alpha * acc - (1.0 - alpha) * e_norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: usize,
    pub tau: f64,
    pub beta: f64,
    pub accuracy: f64,
    pub energy_uj: f64,
    pub e_norm: f64,
    pub y: f64,
    pub feasible: bool,
}

/// Record with the largest `y`; ties go to the earliest.
pub fn best_record(history: &[EvaluationRecord]) -> Option<&EvaluationRecord> {
    history.iter().reduce(|best, r| if r.y > best.y { r } else { best })
}

pub(crate) fn check_bounds(bounds: &ThresholdBounds) -> Result<(), OptimizeError> {
    bounds.validate().map_err(|e| OptimizeError::Setup(e.to_string()))
}
