use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_bounds, OptimizeError};
use crate::pruning::ThresholdBounds;

/// `n0` Latin-hypercube points followed by the four box corners, as
/// `(tau, beta)` pairs.
pub fn lhs_init(bounds: &ThresholdBounds, n0: usize, seed: u64) -> Result<Vec<(f64, f64)>, OptimizeError> {
    check_bounds(bounds)?;
    if n0 == 0 {
        return Err(OptimizeError::Setup("n0 must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axis = |lo: f64, hi: f64| {
        let mut strata: Vec<usize> = (0..n0).collect();
        strata.shuffle(&mut rng);
        strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.gen();
                (lo + (hi - lo) * (s as f64 + u) / n0 as f64).min(hi)
            })
            .collect::<Vec<f64>>()
    };
    let taus = axis(bounds.tau.0, bounds.tau.1);
    let betas = axis(bounds.beta.0, bounds.beta.1);
    let mut points: Vec<(f64, f64)> = taus.into_iter().zip(betas).collect();
    let (t, b) = (bounds.tau, bounds.beta);
    points.extend([(t.0, b.0), (t.0, b.1), (t.1, b.0), (t.1, b.1)]);
    Ok(points)
}
