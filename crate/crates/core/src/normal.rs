//! Normal densities and interval masses with tail-accurate complements.

use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    INV_SQRT_2PI / sd * (-0.5 * z * z).exp()
}

/// `P(lo ≤ X < hi)` for `X ~ N(mean, sd²)`.
///
/// Each endpoint contributes one `erfc` of its smaller tail, so masses deep in
/// either tail keep full relative precision.
pub fn normal_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = (lo - mean) / (sd * std::f64::consts::SQRT_2);
    let b = (hi - mean) / (sd * std::f64::consts::SQRT_2);
    let m = if a >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        1.0 - 0.5 * erfc(-a) - 0.5 * erfc(b)
    };
    m.max(0.0)
}

/// Standard normal cdf.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
