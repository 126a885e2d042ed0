use serde::{Deserialize, Serialize};

use super::OptimizeError;

/// Anisotropic squared-exponential kernel with additive noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub length_scales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl KernelParams {
    /// 0.2 of the box width per axis, unit signal variance, 1e-4 noise.
    pub fn default_for(widths: &[f64]) -> Self {
        Self { length_scales: widths.iter().map(|w| 0.2 * w).collect(), signal_var: 1.0, noise_var: 1e-4 }
    }

    pub fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        self.signal_var * (-0.5 * r2).exp()
    }
}

/// Posterior of a zero-mean GP, with the Cholesky factor of `K + s2 I`
/// cached.
#[derive(Clone, Debug, PartialEq)]
pub struct GpPosterior {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub params: KernelParams,
    /// Diagonal jitter that was needed on top of the noise variance.
    pub jitter: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Lower Cholesky factor of the row-major `n x n` matrix `a`.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn backward_sub_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Factorises `K + noise I`, escalating diagonal jitter from 1e-10 to 1e-6
/// by factors of ten before giving up.
pub fn gp_fit(inputs: &[Vec<f64>], targets: &[f64], params: &KernelParams) -> Result<GpPosterior, OptimizeError> {
    let n = inputs.len();
    if n == 0 || targets.len() != n {
        return Err(OptimizeError::Setup(format!("{n} inputs, {} targets", targets.len())));
    }
    if inputs.iter().any(|x| x.len() != params.length_scales.len()) {
        return Err(OptimizeError::Setup("input dimension differs from kernel".into()));
    }
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = params.k(&inputs[i], &inputs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += params.noise_var;
    }
    let mut jitter = 0.0;
    let chol = loop {
        let mut a = k.clone();
        for i in 0..n {
            a[i * n + i] += jitter;
        }
        if let Some(l) = cholesky(&a, n) {
            break l;
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(OptimizeError::NotPositiveDefinite(JITTER_MAX));
        }
    };
    let alpha = backward_sub_t(&chol, n, &forward_sub(&chol, n, targets));
    Ok(GpPosterior { inputs: inputs.to_vec(), targets: targets.to_vec(), params: params.clone(), jitter, chol, alpha })
}

impl GpPosterior {
    /// Posterior mean and variance (variance clamped at 0).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.inputs.len();
        let ks: Vec<f64> = self.inputs.iter().map(|xi| self.params.k(x, xi)).collect();
        let mean = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_sub(&self.chol, n, &ks);
        let var = self.params.signal_var - v.iter().map(|e| e * e).sum::<f64>();
        (mean, var.max(0.0))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.inputs.len();
        let fit: f64 = self.targets.iter().zip(&self.alpha).map(|(y, a)| y * a).sum();
        let logdet: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

pub fn gp_predict(post: &GpPosterior, x: &[f64]) -> (f64, f64) {
    post.predict(x)
}

const LENGTH_FRACTIONS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];
const SIGNAL_VARS: [f64; 3] = [0.5, 1.0, 2.0];
const NOISE_VARS: [f64; 3] = [1e-6, 1e-4, 1e-2];

/// Picks kernel hyperparameters by log marginal likelihood over a fixed
/// grid (length scales per axis as fractions of the box width, signal and
/// noise variances); falls back to [`KernelParams::default_for`]. Ties keep
/// the first grid entry.
pub fn fit_hyperparameters(inputs: &[Vec<f64>], targets: &[f64], widths: &[f64]) -> Result<GpPosterior, OptimizeError> {
    let dims = widths.len();
    let mut best: Option<(f64, GpPosterior)> = None;
    let combos = LENGTH_FRACTIONS.len().pow(dims as u32);
    for combo in 0..combos {
        let mut c = combo;
        let length_scales: Vec<f64> = widths
            .iter()
            .map(|w| {
                let f = LENGTH_FRACTIONS[c % LENGTH_FRACTIONS.len()];
                c /= LENGTH_FRACTIONS.len();
                f * w
            })
            .collect();
        for &signal_var in &SIGNAL_VARS {
            for &noise_var in &NOISE_VARS {
                let params = KernelParams { length_scales: length_scales.clone(), signal_var, noise_var };
                if let Ok(post) = gp_fit(inputs, targets, &params) {
                    let lml = post.log_marginal_likelihood();
                    if lml.is_finite() && best.as_ref().is_none_or(|(b, _)| lml > *b) {
                        best = Some((lml, post));
                    }
                }
            }
        }
    }
    match best {
        Some((_, post)) => Ok(post),
        None => gp_fit(inputs, targets, &KernelParams::default_for(widths)),
    }
}
