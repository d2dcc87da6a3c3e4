//! Standard normal density and distribution function, with a log-space CDF
//! that stays finite far into the lower tail.

use std::f64::consts::{PI, SQRT_2};

/// ½·ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// ½·ln(2πe), the entropy of a standard normal.
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// Below this argument `ln_cdf` switches to the asymptotic series.
pub const LOG_CDF_ASYMPTOTIC_BELOW: f64 = -8.0;

const ASYMPTOTIC_TERMS: usize = 12;

#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - HALF_LN_2PI
}

#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// ln Φ(z).
pub fn ln_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::INFINITY {
        return 0.0;
    }
    if z > 0.0 {
        return (-0.5 * libm::erfc(z / SQRT_2)).ln_1p();
    }
    if z >= LOG_CDF_ASYMPTOTIC_BELOW {
        return (0.5 * libm::erfc(-z / SQRT_2)).ln();
    }
    if z == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // Φ(z) = φ(z)/(-z) · Σ (-1)^n (2n-1)!! / z^{2n}
    let inv_z2 = 1.0 / (z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=ASYMPTOTIC_TERMS {
        term *= -((2 * n - 1) as f64) * inv_z2;
        sum += term;
    }
    -0.5 * z * z - (-z).ln() - HALF_LN_2PI + sum.ln()
}

/// φ(z)/Φ(z), the inverse Mills ratio.
#[inline]
pub fn inv_mills(z: f64) -> f64 {
    (ln_pdf(z) - ln_cdf(z)).exp()
}
