//! Density and entropy of one coordinate of a bivariate Gaussian after the
//! other coordinate is truncated from above.
//!
//! Coordinates are centered: `t` is the observed coordinate minus its mean and
//! `threshold` is the truncation level minus the mean of the truncated
//! coordinate. The density of `t` given `target ≤ threshold` is
//!
//! ```text
//! p(t) = φ(t/σ_o) / σ_o · Φ((threshold − A·t) / s) / Φ(threshold / σ_t)
//! ```
//!
//! with `A = cov / var_obs` and `s² = var_target − cov² / var_obs`.

use crate::error::{Error, Result};
use crate::normal::{self, HALF_LN_2PI};

use super::quadrature::{integrate_panels, QuadratureSpec};
use super::truncnorm_entropy;

/// Below `DEGENERATE_REL · var_target` the residual variance `s²` is treated as zero.
pub const DEGENERATE_REL: f64 = 1e-12;
/// Densities below this contribute nothing to `−∫ p ln p`.
pub const TINY_DENSITY: f64 = 1e-300;

const TRANSITION_WIDTHS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPair {
    pub var_obs: f64,
    pub var_target: f64,
    pub cov: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
struct Prepared {
    sd_obs: f64,
    sd_target: f64,
    slope: f64,
    resid_sd: f64,
    degenerate: bool,
    // ln σ_o + ln Φ(threshold / σ_t) + ½ ln 2π
    ln_norm: f64,
    uninformative: bool,
}

impl TruncatedPair {
    pub fn new(var_obs: f64, var_target: f64, cov: f64, threshold: f64) -> Result<Self> {
        if !(var_obs > 0.0) || !var_obs.is_finite() {
            return Err(Error::InvalidInput(format!("observed variance must be positive, got {var_obs}")));
        }
        if !(var_target >= 0.0) || !var_target.is_finite() {
            return Err(Error::InvalidInput(format!(
                "target variance must be nonnegative, got {var_target}"
            )));
        }
        if !cov.is_finite() || threshold.is_nan() {
            return Err(Error::InvalidInput("covariance and threshold must be finite".into()));
        }
        Ok(Self { var_obs, var_target, cov, threshold })
    }

    fn prepare(&self) -> Prepared {
        let sd_obs = self.var_obs.sqrt();
        let sd_target = self.var_target.sqrt();
        // A target with no variance carries no information about `t`.
        let uninformative = self.var_target <= f64::MIN_POSITIVE || self.cov == 0.0;
        let slope = self.cov / self.var_obs;
        let resid_var = self.var_target - self.cov * self.cov / self.var_obs;
        let degenerate = !uninformative && resid_var <= DEGENERATE_REL * self.var_target;
        let resid_sd = if degenerate { 0.0 } else { resid_var.max(0.0).sqrt() };
        let ln_norm = if uninformative {
            sd_obs.ln() + HALF_LN_2PI
        } else {
            sd_obs.ln() + normal::ln_cdf(self.threshold / sd_target) + HALF_LN_2PI
        };
        Prepared { sd_obs, sd_target, slope, resid_sd, degenerate, ln_norm, uninformative }
    }

    /// True when the residual variance of the target given the observed coordinate vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.prepare().degenerate
    }

    pub fn ln_density(&self, t: f64) -> f64 {
        let p = self.prepare();
        ln_density_prepared(&p, self, t)
    }

    pub fn density(&self, t: f64) -> f64 {
        self.ln_density(t).exp()
    }

    /// Integration breakpoints: the support interval plus the location and
    /// width of the truncation step, and the mode region of the conditional law.
    fn breakpoints(&self, p: &Prepared, q: &QuadratureSpec) -> Vec<f64> {
        let r = q.half_width();
        let mut lo = -r * p.sd_obs;
        let mut hi = r * p.sd_obs;
        let mut interior = Vec::new();
        if !p.uninformative {
            let gamma = self.threshold / p.sd_target;
            let lambda = normal::inv_mills(gamma);
            let rho_scale = self.cov / p.sd_target;
            let mean_c = -rho_scale * lambda;
            let var_c = self.var_obs - rho_scale * rho_scale * lambda * (lambda + gamma);
            let sd_c = var_c.max(0.0).sqrt();
            if mean_c.is_finite() && sd_c.is_finite() {
                lo = lo.min(mean_c - r * sd_c);
                hi = hi.max(mean_c + r * sd_c);
                interior.push(mean_c);
            }
            if p.slope != 0.0 {
                let step = self.threshold / p.slope;
                let width = p.resid_sd / p.slope.abs();
                interior.push(step);
                if width > 0.0 {
                    interior.push(step - TRANSITION_WIDTHS * width);
                    interior.push(step + TRANSITION_WIDTHS * width);
                }
            }
        }
        let span = hi - lo;
        let mut breaks = vec![lo, hi];
        breaks.extend(interior.into_iter().filter(|b| b.is_finite() && *b > lo && *b < hi));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
        breaks
    }

    /// ∫ p(t) dt by quadrature; equals one up to quadrature error.
    pub fn density_integral(&self, q: &QuadratureSpec) -> Result<f64> {
        let p = self.prepare();
        let breaks = self.breakpoints(&p, q);
        integrate_panels(|t| ln_density_prepared(&p, self, t).exp(), &breaks, q)
    }

    /// −∫ p ln p by quadrature, including the degenerate step-indicator case.
    pub fn entropy_by_quadrature(&self, q: &QuadratureSpec) -> Result<f64> {
        let p = self.prepare();
        let breaks = self.breakpoints(&p, q);
        integrate_panels(
            |t| {
                let lp = ln_density_prepared(&p, self, t);
                let d = lp.exp();
                if d < TINY_DENSITY {
                    0.0
                } else {
                    -d * lp
                }
            },
            &breaks,
            q,
        )
    }

    /// Entropy of `t`, using the closed-form truncated normal when the
    /// residual variance vanishes.
    pub fn entropy(&self, q: &QuadratureSpec) -> Result<f64> {
        let p = self.prepare();
        if p.uninformative {
            return Ok(normal::HALF_LN_2PI_E + p.sd_obs.ln());
        }
        if p.degenerate {
            // t is an affine image of the truncated target with |scale| = σ_o/σ_t.
            let gamma = self.threshold / p.sd_target;
            return Ok(truncnorm_entropy(0.0, p.sd_obs, gamma * p.sd_obs)?);
        }
        self.entropy_by_quadrature(q)
    }
}

#[inline]
fn ln_density_prepared(p: &Prepared, pair: &TruncatedPair, t: f64) -> f64 {
    let z = t / p.sd_obs;
    let base = -0.5 * z * z - p.ln_norm;
    if p.uninformative {
        return base;
    }
    if p.degenerate {
        if p.slope * t <= pair.threshold {
            base
        } else {
            f64::NEG_INFINITY
        }
    } else {
        base + normal::ln_cdf((pair.threshold - p.slope * t) / p.resid_sd)
    }
}
