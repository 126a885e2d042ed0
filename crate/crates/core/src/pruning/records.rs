use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of one early-exit inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub sample: usize,
    /// Ground-truth class.
    pub label: usize,
    pub prediction: usize,
    /// Timesteps executed, `1..=T`.
    pub t_star: usize,
    pub confidence: f64,
    pub correct: bool,
}

/// `sample,class,t_star,confidence,correct`, where `class` is the
/// predicted class and `correct` is 0/1.
pub fn records_to_csv(records: &[ExitRecord]) -> String {
    let mut out = String::from("sample,class,t_star,confidence,correct\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sample,
            r.prediction,
            r.t_star,
            r.confidence,
            u8::from(r.correct)
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: usize,
    pub samples: usize,
    pub mean_t_star: f64,
    pub accuracy: f64,
}

/// Mean exit step and accuracy per ground-truth class, ascending class.
pub fn class_summary(records: &[ExitRecord]) -> Vec<ClassSummary> {
    let mut groups: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.label).or_default();
        g.0 += 1;
        g.1 += r.t_star;
        g.2 += usize::from(r.correct);
    }
    groups
        .into_iter()
        .map(|(class, (n, t, ok))| ClassSummary {
            class,
            samples: n,
            mean_t_star: t as f64 / n as f64,
            accuracy: ok as f64 / n as f64,
        })
        .collect()
}

/// `class,mean_t_star,accuracy`.
pub fn summary_to_csv(summary: &[ClassSummary]) -> String {
    let mut out = String::from("class,mean_t_star,accuracy\n");
    for s in summary {
        out.push_str(&format!("{},{},{}\n", s.class, s.mean_t_star, s.accuracy));
    }
    out
}
