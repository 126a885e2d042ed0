use rayon::prelude::*;

use super::{frame_at, Matrix, Sample, SdtError, SdtModel};
use crate::spike::FRAC_BITS;

/// Token-summed spike counts of the last encoder layer, one row per
/// timestep of a full unpruned run.
pub fn head_features(model: &SdtModel, sample: &Sample) -> Result<Vec<Vec<u64>>, SdtError> {
    let cfg = model.config();
    let mut session = model.session(&vec![false; cfg.depth])?;
    let mut rows = Vec::with_capacity(cfg.timesteps);
    for t in 0..cfg.timesteps {
        session.step(frame_at(&sample.frames, t)?)?;
        let x = session.last_features().expect("stepped");
        rows.push((0..cfg.dim).map(|d| x.column_count_ones(d)).collect());
    }
    Ok(rows)
}

/// Running means of the per-timestep features, one per prefix length.
fn prefix_means(rows: &[Vec<u64>]) -> Vec<Vec<f64>> {
    let mut sum = vec![0f64; rows.first().map_or(0, Vec::len)];
    rows.iter()
        .enumerate()
        .map(|(t, row)| {
            sum.iter_mut().zip(row).for_each(|(a, &v)| *a += v as f64);
            sum.iter().map(|a| a / (t + 1) as f64).collect()
        })
        .collect()
}

/// Replaces the head with a diagonal linear-discriminant readout.
///
/// Early exit reads the running-mean logits after every timestep, so the
/// readout is fitted on the running-mean features of every prefix of every
/// sample: weights follow `(mu_c - mu) / (var + 1)` scaled to a peak
/// magnitude of 127 and the bias is `-w_c . (mu_c + mu) / 2`. Classes
/// without samples score zero. The logit scale is then fitted by
/// temperature scaling over the same prefixes.
pub fn calibrate_head(model: &mut SdtModel, samples: &[Sample]) -> Result<(), SdtError> {
    let cfg = model.config();
    let (dim, classes, tokens) = (cfg.dim, cfg.classes, cfg.tokens());
    if samples.is_empty() {
        return Err(SdtError::Config("head calibration needs samples".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(SdtError::Config(format!("label {} with {classes} classes", s.label)));
    }
    let per_sample: Vec<Vec<Vec<u64>>> =
        samples.par_iter().map(|s| head_features(model, s)).collect::<Result<_, _>>()?;
    let timesteps = cfg.timesteps;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (s, rows) in samples.iter().zip(&per_sample) {
        for m in prefix_means(rows) {
            features.push(m);
            labels.push(s.label);
        }
    }
    // class means per prefix length; the spread between prefixes is
    // warm-up, not noise, so variances are taken around these
    let mut step_means = vec![vec![vec![0f64; dim]; timesteps]; classes];
    let mut counts = vec![0usize; classes];
    for (i, (&y, f)) in labels.iter().zip(&features).enumerate() {
        if i % timesteps == 0 {
            counts[y] += 1;
        }
        for (a, &v) in step_means[y][i % timesteps].iter_mut().zip(f) {
            *a += v;
        }
    }
    for (c, per_t) in step_means.iter_mut().enumerate() {
        per_t.iter_mut().flatten().for_each(|v| *v /= counts[c].max(1) as f64);
    }
    let means: Vec<Vec<f64>> = step_means
        .iter()
        .map(|per_t| (0..dim).map(|d| per_t.iter().map(|m| m[d]).sum::<f64>() / timesteps as f64).collect())
        .collect();
    let mut var = vec![0f64; dim];
    for (i, (&y, f)) in labels.iter().zip(&features).enumerate() {
        for d in 0..dim {
            var[d] += (f[d] - step_means[y][i % timesteps][d]).powi(2) / features.len() as f64;
        }
    }
    let present: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
    let grand: Vec<f64> =
        (0..dim).map(|d| present.iter().map(|&c| means[c][d]).sum::<f64>() / present.len() as f64).collect();
    let mut raw: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            (0..dim).map(|d| if counts[c] > 0 { (means[c][d] - grand[d]) / (var[d] + 1.0) } else { 0.0 }).collect()
        })
        .collect();
    // Features drift along a shared direction while the network warms up.
    // Weights orthogonal to that drift keep the class ranking of a
    // running mean from depending on the prefix length.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for t in 0..timesteps {
        let mut g: Vec<f64> = (0..dim)
            .map(|d| present.iter().map(|&c| step_means[c][t][d]).sum::<f64>() / present.len() as f64 - grand[d])
            .collect();
        for u in &basis {
            let p: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
            g.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            basis.push(g.into_iter().map(|v| v / norm).collect());
        }
    }
    for w in raw.iter_mut() {
        for u in &basis {
            let p: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
    }
    let peak = raw.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 127.0 / peak } else { 0.0 };
    let head = Matrix::from_fn(dim, classes, |d, c| (raw[c][d] * scale).round() as i8);
    let head_bias: Vec<i32> = (0..classes)
        .map(|c| {
            if counts[c] == 0 {
                return 0;
            }
            let dot: f64 = (0..dim).map(|d| f64::from(head.get(d, c)) * (means[c][d] + grand[d])).sum();
            (-0.5 * dot).round() as i32
        })
        .collect();
    let scores: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            (0..classes)
                .map(|c| (0..dim).map(|d| f[d] * f64::from(head.get(d, c))).sum::<f64>() + f64::from(head_bias[c]))
                .collect()
        })
        .collect();
    let scale = fit_scale(&scores, &labels, (tokens as i64) << FRAC_BITS);
    let w = model.weights_mut();
    w.head = head;
    w.head_bias = head_bias;
    w.head_scale = scale;
    Ok(())
}

/// Temperature scaling: the logit divisor, from a quarter-octave ladder
/// around `base`, that minimises the negative log-likelihood of the raw
/// running-mean scores. Ties keep the larger divisor.
fn fit_scale(scores: &[Vec<f64>], labels: &[usize], base: i64) -> i64 {
    let nll = |scale: f64| -> f64 {
        scores
            .iter()
            .zip(labels)
            .map(|(s, &y)| {
                let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m / scale + s.iter().map(|v| ((v - m) / scale).exp()).sum::<f64>().ln();
                lse - s[y] / scale
            })
            .sum()
    };
    let mut best = (f64::INFINITY, base);
    for k in (-48..=8).rev() {
        let scale = ((base as f64) * 2f64.powf(f64::from(k) / 4.0)).round().max(1.0) as i64;
        let v = nll(scale as f64);
        if v < best.0 {
            best = (v, scale);
        }
    }
    best.1
}
