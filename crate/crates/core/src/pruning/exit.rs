use rayon::prelude::*;

use super::{argmax, confidence, select_skipped_layers, ConfidenceMetric, ExitRecord, PruningError, ThresholdConfig};
use crate::hw_cost::ActivityTrace;
use crate::sdt::{frame_at, FiringRateProfile, ForwardResult, LogitTrace, Sample, SdtModel};

/// Confidence and prediction of the running-mean logits after every
/// timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceTrace {
    pub confidence: Vec<f64>,
    pub prediction: Vec<usize>,
}

impl ConfidenceTrace {
    pub fn from_logits(logits: &LogitTrace, metric: ConfidenceMetric) -> Result<Self, PruningError> {
        let mut confidence_ = Vec::with_capacity(logits.len());
        let mut prediction = Vec::with_capacity(logits.len());
        for t in 0..logits.len() {
            let mean = logits.running_mean(t);
            confidence_.push(confidence(&mean, metric)?);
            prediction.push(argmax(&mean));
        }
        Ok(Self { confidence: confidence_, prediction })
    }
}

/// 1-based exit step: the first `t` whose confidence exceeds `beta`, or
/// the trace length if none does.
pub fn exit_step(confidence: &[f64], beta: f64) -> usize {
    confidence.iter().position(|&c| c > beta).map_or(confidence.len(), |i| i + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferOutcome {
    pub prediction: usize,
    pub record: ExitRecord,
    /// Logits and activity of the timesteps actually executed.
    pub result: ForwardResult,
}

/// Runs timesteps until the running-mean confidence exceeds `theta.beta`.
pub fn early_exit_infer(
    model: &SdtModel,
    sample: &Sample,
    sample_id: usize,
    theta: &ThresholdConfig,
    skip_mask: &[bool],
) -> Result<InferOutcome, PruningError> {
    theta.validate()?;
    let timesteps = model.config().timesteps;
    let mut session = model.session(skip_mask)?;
    let (mut conf, mut pred) = (0.0, 0);
    for t in 0..timesteps {
        session.step(frame_at(&sample.frames, t)?)?;
        let mean = session.logits().running_mean(t);
        conf = confidence(&mean, theta.metric)?;
        pred = argmax(&mean);
        if conf > theta.beta {
            break;
        }
    }
    let t_star = session.timesteps();
    Ok(InferOutcome {
        prediction: pred,
        record: ExitRecord {
            sample: sample_id,
            label: sample.label,
            prediction: pred,
            t_star,
            confidence: conf,
            correct: pred == sample.label,
        },
        result: session.finish(),
    })
}

/// Layer skipping from `profile` followed by early exit.
pub fn combined_infer(
    model: &SdtModel,
    sample: &Sample,
    sample_id: usize,
    theta: &ThresholdConfig,
    profile: &FiringRateProfile,
) -> Result<(InferOutcome, Vec<bool>), PruningError> {
    let mask = select_skipped_layers(profile, theta.tau, model.config().depth)?;
    let outcome = early_exit_infer(model, sample, sample_id, theta, &mask)?;
    Ok((outcome, mask))
}

/// A full-length run of one sample under a fixed skip mask. Because
/// inference is causal, early exit at any `beta` is a prefix of this run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluatedSample {
    pub label: usize,
    pub trace: ConfidenceTrace,
    pub activity: ActivityTrace,
}

impl EvaluatedSample {
    pub fn run(model: &SdtModel, sample: &Sample, skip_mask: &[bool], metric: ConfidenceMetric) -> Result<Self, PruningError> {
        let r = model.forward(&sample.frames, skip_mask, model.config().timesteps)?;
        Ok(Self { label: sample.label, trace: ConfidenceTrace::from_logits(&r.logits, metric)?, activity: r.activity })
    }

    pub fn record(&self, sample: usize, beta: f64) -> ExitRecord {
        let t_star = exit_step(&self.trace.confidence, beta);
        let prediction = self.trace.prediction[t_star - 1];
        ExitRecord {
            sample,
            label: self.label,
            prediction,
            t_star,
            confidence: self.trace.confidence[t_star - 1],
            correct: prediction == self.label,
        }
    }

    /// Activity of the first `t_star` timesteps.
    pub fn truncated(&self, t_star: usize) -> ActivityTrace {
        ActivityTrace {
            layers: self.activity.layers,
            ops: self.activity.ops.iter().filter(|o| o.timestep < t_star).cloned().collect(),
        }
    }
}

/// Batch outcome of one (skip mask, beta) setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub skip_mask: Vec<bool>,
    pub records: Vec<ExitRecord>,
    pub accuracy: f64,
    pub mean_timesteps: f64,
    /// Per-inference mean of the executed activity.
    pub activity: ActivityTrace,
}

impl Evaluation {
    pub fn skipped_layers(&self) -> usize {
        self.skip_mask.iter().filter(|&&s| s).count()
    }

    pub fn from_runs(runs: &[EvaluatedSample], skip_mask: &[bool], beta: f64) -> Result<Self, PruningError> {
        if runs.is_empty() {
            return Err(PruningError::EmptySet);
        }
        let records: Vec<ExitRecord> = runs.iter().enumerate().map(|(i, r)| r.record(i, beta)).collect();
        let traces: Vec<ActivityTrace> = runs.iter().zip(&records).map(|(r, rec)| r.truncated(rec.t_star)).collect();
        let n = records.len() as f64;
        Ok(Self {
            skip_mask: skip_mask.to_vec(),
            accuracy: records.iter().filter(|r| r.correct).count() as f64 / n,
            mean_timesteps: records.iter().map(|r| r.t_star as f64).sum::<f64>() / n,
            activity: ActivityTrace::mean(&traces)?,
            records,
        })
    }
}

/// Runs every sample under `skip_mask` (in parallel) for later evaluation
/// at any `beta`.
pub fn evaluate(
    model: &SdtModel,
    samples: &[Sample],
    skip_mask: &[bool],
    metric: ConfidenceMetric,
) -> Result<Vec<EvaluatedSample>, PruningError> {
    if samples.is_empty() {
        return Err(PruningError::EmptySet);
    }
    samples.par_iter().map(|s| EvaluatedSample::run(model, s, skip_mask, metric)).collect()
}
