use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{best_record, pareto_front, EvaluationRecord, OptimizeError};

/// Writes one JSON record per line.
pub fn save_campaign(records: &[EvaluationRecord], mut w: impl Write) -> Result<(), OptimizeError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a campaign written by [`save_campaign`]. Blank lines are skipped;
/// indices must run 0, 1, 2, ...
pub fn load_campaign(r: impl BufRead) -> Result<Vec<EvaluationRecord>, OptimizeError> {
    let mut out: Vec<EvaluationRecord> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvaluationRecord =
            serde_json::from_str(&line).map_err(|e| OptimizeError::Campaign { line: i + 1, message: e.to_string() })?;
        if rec.index != out.len() {
            return Err(OptimizeError::Campaign { line: i + 1, message: format!("index {} where {} expected", rec.index, out.len()) });
        }
        out.push(rec);
    }
    Ok(out)
}

/// `index,tau,beta,accuracy,e_norm,energy_uj,y` for each front member.
pub fn pareto_to_csv(records: &[EvaluationRecord], w: impl Write) -> Result<(), OptimizeError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "tau", "beta", "accuracy", "e_norm", "energy_uj", "y"]).map_err(std::io::Error::other)?;
    for r in &pareto_front(records).members {
        out.write_record([
            r.index.to_string(),
            r.tau.to_string(),
            r.beta.to_string(),
            r.accuracy.to_string(),
            r.e_norm.to_string(),
            r.energy_uj.to_string(),
            r.y.to_string(),
        ])
        .map_err(std::io::Error::other)?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a method comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub evaluations: usize,
    pub best_y: f64,
    pub best_tau: f64,
    pub best_beta: f64,
    pub hypervolume: f64,
    pub front_size: usize,
}

impl MethodSummary {
    pub fn from_history(method: &str, history: &[EvaluationRecord], reference: (f64, f64)) -> Result<Self, OptimizeError> {
        let best = best_record(history).ok_or_else(|| OptimizeError::Setup(format!("{method}: empty history")))?;
        let front = pareto_front(history);
        Ok(Self {
            method: method.to_string(),
            evaluations: history.len(),
            best_y: best.y,
            best_tau: best.tau,
            best_beta: best.beta,
            hypervolume: front.hypervolume(reference)?,
            front_size: front.members.len(),
        })
    }
}

pub fn comparison_to_csv(rows: &[MethodSummary], w: impl Write) -> Result<(), OptimizeError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(std::io::Error::other)?;
    }
    if rows.is_empty() {
        out.write_record(["method", "evaluations", "best_y", "best_tau", "best_beta", "hypervolume", "front_size"])
            .map_err(std::io::Error::other)?;
    }
    out.flush()?;
    Ok(())
}
