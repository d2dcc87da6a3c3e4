//! Entropies used by the acquisition functions.
//!
//! All truncated entropies are computed in centered coordinates, which makes
//! them exactly invariant to a common shift of the means and the max value.

pub mod quadrature;
pub mod truncation;

pub use quadrature::{integrate_1d, integrate_panels, QuadratureScheme, QuadratureSpec};
pub use truncation::TruncatedPair;

use crate::error::{Error, Result};
use crate::gp::JointMoments;
use crate::normal::{self, HALF_LN_2PI_E};

/// Predictive moments plus the truncation level, with an optional noise
/// variance for the noisy-observation variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyInputs {
    pub moments: JointMoments,
    pub f_star: f64,
    pub noise_var: Option<f64>,
}

impl EntropyInputs {
    pub fn new(moments: JointMoments, f_star: f64) -> Self {
        Self { moments, f_star, noise_var: None }
    }

    pub fn with_noise(moments: JointMoments, f_star: f64, noise_var: f64) -> Self {
        Self { moments, f_star, noise_var: Some(noise_var) }
    }

    fn pair(&self, noisy: bool) -> Result<TruncatedPair> {
        let m = &self.moments;
        let noise = if noisy {
            match self.noise_var {
                Some(v) if v > 0.0 => v,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "noisy entropy needs a positive noise variance, got {other:?}"
                    )))
                }
            }
        } else {
            0.0
        };
        if !(m.var_m > 0.0) {
            return Err(Error::InvalidInput(format!("var_m must be positive, got {}", m.var_m)));
        }
        if !(m.var_target > 0.0) {
            return Err(Error::InvalidInput(format!(
                "var_M must be positive, got {}",
                m.var_target
            )));
        }
        TruncatedPair::new(m.var_m + noise, m.var_target, m.cov, self.f_star - m.mu_target)
    }
}

/// ln(σ·√(2πe))
pub fn gaussian_entropy(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    Ok(HALF_LN_2PI_E + sigma.ln())
}

/// Entropy of a noisy observation, ln √(2πe(var + noise_var)).
pub fn gaussian_entropy_noisy(var: f64, noise_var: f64) -> f64 {
    HALF_LN_2PI_E + 0.5 * (var.max(0.0) + noise_var).ln()
}

/// Entropy of N(mu, sigma²) truncated to values ≤ `f_star`.
pub fn truncnorm_entropy(mu: f64, sigma: f64, f_star: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let gamma = (f_star - mu) / sigma;
    Ok(truncnorm_entropy_std(gamma) + sigma.ln())
}

/// Entropy of a standard normal truncated above at `gamma`.
pub(crate) fn truncnorm_entropy_std(gamma: f64) -> f64 {
    if gamma == f64::INFINITY {
        return HALF_LN_2PI_E;
    }
    let ln_cdf = normal::ln_cdf(gamma);
    let correction = gamma * (normal::ln_pdf(gamma) - ln_cdf).exp();
    HALF_LN_2PI_E + ln_cdf - 0.5 * correction
}

/// Entropy of f^(m) at x given f^(M) ≤ f*, as a one-dimensional integral of
/// the conditional density. Falls back to the closed-form truncated normal
/// when f^(M) is (numerically) a deterministic function of f^(m).
pub fn lemma1_entropy(inp: &EntropyInputs, q: &QuadratureSpec) -> Result<f64> {
    inp.pair(false)?.entropy(q)
}

/// Noisy-observation counterpart: entropy of y^(m) = f^(m) + ε given f^(M) ≤ f*.
pub fn lemma1_entropy_noisy(inp: &EntropyInputs, q: &QuadratureSpec) -> Result<f64> {
    inp.pair(true)?.entropy(q)
}

/// ∫ Z·Ψ over the integration range.
pub fn lemma1_density_integral(inp: &EntropyInputs, q: &QuadratureSpec) -> Result<f64> {
    inp.pair(false)?.density_integral(q)
}
