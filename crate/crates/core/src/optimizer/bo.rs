use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ei::expected_improvement;
use super::gp::fit_hyperparameters;
use super::lhs::lhs_init;
use super::nelder_mead::nelder_mead_max;
use super::{check_bounds, EvaluationRecord, Evaluator, ObjectiveSpec, OptimizeError};
use crate::pruning::ThresholdBounds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSettings {
    /// Total evaluation budget, initial design included.
    pub budget: usize,
    pub n0: usize,
    pub seed: u64,
    /// Candidate grid points per axis for EI maximisation.
    pub grid: usize,
    /// Grid cells refined by Nelder-Mead.
    pub top_k: usize,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self { budget: 80, n0: 10, seed: 0, grid: 101, top_k: 5 }
    }
}

const NM_STEP: f64 = 0.05;
const NM_ITERS: usize = 60;

fn evaluate_into(
    evaluator: &mut impl Evaluator,
    spec: &ObjectiveSpec,
    history: &mut Vec<EvaluationRecord>,
    observer: &mut dyn FnMut(&EvaluationRecord) -> Result<(), OptimizeError>,
    tau: f64,
    beta: f64,
) -> Result<(), OptimizeError> {
    let index = history.len();
    let m = match evaluator.evaluate(tau, beta) {
        Ok(m) => m,
        Err(message) => return Err(OptimizeError::Evaluation { index, message, history: std::mem::take(history) }),
    };
    let record = spec.record(index, tau, beta, m)?;
    observer(&record)?;
    history.push(record);
    Ok(())
}

/// Next point to evaluate: EI maximised over a dense grid of the unit box,
/// then refined from the best `top_k` cells.
fn propose(history: &[EvaluationRecord], bounds: &ThresholdBounds, settings: &BoSettings) -> Result<(f64, f64), OptimizeError> {
    let (t0, tw) = (bounds.tau.0, bounds.tau.1 - bounds.tau.0);
    let (b0, bw) = (bounds.beta.0, bounds.beta.1 - bounds.beta.0);
    let xs: Vec<Vec<f64>> = history.iter().map(|r| vec![(r.tau - t0) / tw, (r.beta - b0) / bw]).collect();
    let ys: Vec<f64> = history.iter().map(|r| r.y).collect();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    let zs: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
    let g_plus = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let post = fit_hyperparameters(&xs, &zs, &[1.0, 1.0])?;
    let ei = |x: &[f64]| {
        let (m, s2) = post.predict(x);
        expected_improvement(m, s2.sqrt(), g_plus)
    };

    let g = settings.grid;
    let coord = |i: usize| if g == 1 { 0.5 } else { i as f64 / (g - 1) as f64 };
    let mut cells: Vec<(f64, usize)> = (0..g * g).map(|c| (ei(&[coord(c / g), coord(c % g)]), c)).collect();
    // descending EI, lowest index first among ties
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let first = cells[0].1;
    let mut best = (vec![coord(first / g), coord(first % g)], cells[0].0);
    for &(_, c) in cells.iter().take(settings.top_k) {
        let start = [coord(c / g), coord(c % g)];
        let (x, v) = nelder_mead_max(&ei, &start, &[0.0, 0.0], &[1.0, 1.0], NM_STEP, NM_ITERS);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok((t0 + tw * best.0[0], b0 + bw * best.0[1]))
}

/// Runs the optimisation loop up to `settings.budget` evaluations,
/// continuing from `history` (a prefix of an earlier run with the same
/// settings). On evaluator failure the error carries the records so far.
pub fn bo_loop(
    evaluator: &mut impl Evaluator,
    spec: &ObjectiveSpec,
    bounds: &ThresholdBounds,
    settings: &BoSettings,
    history: Vec<EvaluationRecord>,
) -> Result<Vec<EvaluationRecord>, OptimizeError> {
    bo_loop_observed(evaluator, spec, bounds, settings, history, &mut |_| Ok(()))
}

/// [`bo_loop`] with a callback run on each new record before it is
/// appended, e.g. to persist the campaign incrementally.
pub fn bo_loop_observed(
    evaluator: &mut impl Evaluator,
    spec: &ObjectiveSpec,
    bounds: &ThresholdBounds,
    settings: &BoSettings,
    mut history: Vec<EvaluationRecord>,
    observer: &mut dyn FnMut(&EvaluationRecord) -> Result<(), OptimizeError>,
) -> Result<Vec<EvaluationRecord>, OptimizeError> {
    spec.validate()?;
    check_bounds(bounds)?;
    if settings.budget <= settings.n0 + 4 {
        return Err(OptimizeError::Setup(format!("budget {} must exceed n0 + 4 = {}", settings.budget, settings.n0 + 4)));
    }
    if settings.grid == 0 || settings.top_k == 0 {
        return Err(OptimizeError::Setup("grid and top_k must be positive".into()));
    }
    if history.len() > settings.budget {
        return Err(OptimizeError::Setup(format!("history has {} records, budget is {}", history.len(), settings.budget)));
    }
    let init = lhs_init(bounds, settings.n0, settings.seed)?;
    for (i, r) in history.iter().enumerate() {
        let planned = init.get(i).copied();
        if r.index != i || planned.is_some_and(|p| p != (r.tau, r.beta)) {
            return Err(OptimizeError::Setup(format!("history record {i} does not match this campaign's initial design")));
        }
    }
    for &(tau, beta) in init.iter().skip(history.len()) {
        evaluate_into(evaluator, spec, &mut history, observer, tau, beta)?;
    }
    while history.len() < settings.budget {
        let (tau, beta) = propose(&history, bounds, settings)?;
        evaluate_into(evaluator, spec, &mut history, observer, tau, beta)?;
    }
    Ok(history)
}

/// Inclusive `n_tau x n_beta` grid, tau-major. A single point on an axis
/// sits at its midpoint.
pub fn grid_search(
    evaluator: &mut impl Evaluator,
    spec: &ObjectiveSpec,
    bounds: &ThresholdBounds,
    dims: (usize, usize),
) -> Result<Vec<EvaluationRecord>, OptimizeError> {
    spec.validate()?;
    check_bounds(bounds)?;
    if dims.0 == 0 || dims.1 == 0 {
        return Err(OptimizeError::Setup("grid dimensions must be positive".into()));
    }
    let axis = |(lo, hi): (f64, f64), n: usize, i: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else if i == n - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut history = Vec::with_capacity(dims.0 * dims.1);
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            let (tau, beta) = (axis(bounds.tau, dims.0, i), axis(bounds.beta, dims.1, j));
            evaluate_into(evaluator, spec, &mut history, &mut |_| Ok(()), tau, beta)?;
        }
    }
    Ok(history)
}

/// `n` points uniform over the box.
pub fn random_search(
    evaluator: &mut impl Evaluator,
    spec: &ObjectiveSpec,
    bounds: &ThresholdBounds,
    n: usize,
    seed: u64,
) -> Result<Vec<EvaluationRecord>, OptimizeError> {
    spec.validate()?;
    check_bounds(bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let tau = rng.gen_range(bounds.tau.0..=bounds.tau.1);
        let beta = rng.gen_range(bounds.beta.0..=bounds.beta.1);
        evaluate_into(evaluator, spec, &mut history, &mut |_| Ok(()), tau, beta)?;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{best_record, Measurement};

    fn spec() -> ObjectiveSpec {
        ObjectiveSpec { alpha: 0.5, e_lo: 30.0, e_hi: 90.0, accuracy_floor: None }
    }

    fn surface(tau: f64, beta: f64) -> Result<Measurement, String> {
        Ok(Measurement {
            accuracy: 0.9 - 0.5 * (tau - 0.4).powi(2) - 0.5 * (beta - 0.6).powi(2),
            energy_uj: 60.0 - 30.0 * tau + 30.0 * beta,
        })
    }

    #[test]
    fn two_by_two_grid_is_corners() {
        let h = grid_search(&mut surface, &spec(), &ThresholdBounds::default(), (2, 2)).unwrap();
        let pts: Vec<_> = h.iter().map(|r| (r.tau, r.beta)).collect();
        assert_eq!(pts, [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn random_is_seeded() {
        let b = ThresholdBounds::default();
        let a = random_search(&mut surface, &spec(), &b, 6, 9).unwrap();
        assert_eq!(a, random_search(&mut surface, &spec(), &b, 6, 9).unwrap());
    }

    #[test]
    fn constant_objective() {
        let mut f = |_: f64, _: f64| Ok(Measurement { accuracy: 0.5, energy_uj: 60.0 });
        let s = BoSettings { budget: 17, n0: 3, seed: 1, grid: 21, top_k: 2 };
        let h = bo_loop(&mut f, &spec(), &ThresholdBounds::default(), &s, Vec::new()).unwrap();
        assert_eq!(h.len(), 17);
        assert!(h.iter().all(|r| r.y == h[0].y));
    }

    #[test]
    fn budget_must_exceed_init() {
        let s = BoSettings { budget: 14, n0: 10, ..BoSettings::default() };
        assert!(bo_loop(&mut surface, &spec(), &ThresholdBounds::default(), &s, Vec::new()).is_err());
    }

    #[test]
    fn failure_keeps_partial_history_and_resume_matches() {
        let b = ThresholdBounds::default();
        let s = BoSettings { budget: 20, n0: 5, seed: 4, grid: 31, top_k: 3 };
        let full = bo_loop(&mut surface, &spec(), &b, &s, Vec::new()).unwrap();
        let mut calls = 0;
        let mut flaky = |t: f64, be: f64| {
            calls += 1;
            if calls == 13 {
                Err("interrupted".to_string())
            } else {
                surface(t, be)
            }
        };
        let partial = match bo_loop(&mut flaky, &spec(), &b, &s, Vec::new()) {
            Err(OptimizeError::Evaluation { index, history, .. }) => {
                assert_eq!(index, 12);
                history
            }
            other => panic!("{other:?}"),
        };
        assert_eq!(partial[..], full[..12]);
        let resumed = bo_loop(&mut surface, &spec(), &b, &s, partial).unwrap();
        assert_eq!(resumed, full);
    }

    #[test]
    fn best_so_far_non_decreasing_and_near_optimum() {
        let s = BoSettings { budget: 30, n0: 6, seed: 2, grid: 51, top_k: 3 };
        let h = bo_loop(&mut surface, &spec(), &ThresholdBounds::default(), &s, Vec::new()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for r in &h {
            let next = best.max(r.y);
            assert!(next >= best);
            best = next;
        }
        assert!(best_record(&h).unwrap().y > 0.27);
    }
}
