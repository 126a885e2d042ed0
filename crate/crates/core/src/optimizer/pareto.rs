use serde::Serialize;

use super::{EvaluationRecord, OptimizeError};

/// Reference point `(accuracy, e_norm)` dominated by every normalised
/// record.
pub const DEFAULT_REFERENCE: (f64, f64) = (0.0, 1.0);

/// Non-dominated records (maximise accuracy, minimise `e_norm`), ascending
/// accuracy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoFront {
    pub members: Vec<EvaluationRecord>,
}

impl ParetoFront {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.members.iter().map(|r| (r.accuracy, r.e_norm)).collect()
    }

    pub fn hypervolume(&self, reference: (f64, f64)) -> Result<f64, OptimizeError> {
        hypervolume(&self.points(), reference)
    }
}

/// Keeps every record not weakly dominated by another. Of several records
/// with identical objectives only the first is kept.
pub fn pareto_front(records: &[EvaluationRecord]) -> ParetoFront {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.e_norm.total_cmp(&rb.e_norm).then(rb.accuracy.total_cmp(&ra.accuracy)).then(a.cmp(&b))
    });
    let mut best_acc = f64::NEG_INFINITY;
    let mut members = Vec::new();
    for i in order {
        if records[i].accuracy > best_acc {
            best_acc = records[i].accuracy;
            members.push(records[i].clone());
        }
    }
    members.sort_by(|a, b| a.accuracy.total_cmp(&b.accuracy));
    ParetoFront { members }
}

/// Area dominated by `points` (accuracy up, `e_norm` down) and bounded by
/// `reference`. Dominated points are allowed and contribute nothing.
pub fn hypervolume(points: &[(f64, f64)], reference: (f64, f64)) -> Result<f64, OptimizeError> {
    let (acc_ref, e_ref) = reference;
    if let Some(&(acc, e_norm)) = points.iter().find(|(a, e)| !(*a >= acc_ref && *e <= e_ref)) {
        return Err(OptimizeError::Reference { acc, e_norm });
    }
    // sweep by ascending e: each point adds the accuracy it gains over all
    // cheaper points, over the remaining energy width
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));
    let mut area = 0.0;
    let mut covered = acc_ref;
    for (acc, e) in sorted {
        if acc > covered {
            area += (acc - covered) * (e_ref - e);
            covered = acc;
        }
    }
    Ok(area)
}
