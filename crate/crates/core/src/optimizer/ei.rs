use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Expected improvement of a `N(m, s^2)` prediction over the incumbent
/// `g_plus`. For `s < 1e-12` the prediction is treated as exact.
pub fn expected_improvement(m: f64, s: f64, g_plus: f64) -> f64 {
    let d = m - g_plus;
    if s < 1e-12 {
        return d.max(0.0);
    }
    let z = d / s;
    (d * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
}
