//! Max-value sampling through a Gumbel fit to the independence-approximated
//! CDF P(f* ≤ y) ≈ Π_x Φ((y − μ(x))/σ(x)).

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::FittedModel;
use crate::normal;
use crate::rng::stream_from_seed;

pub const QUARTILE_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];
pub const FLOOR_LEVEL: f64 = 1e-6;
const BISECTION_STEPS: usize = 200;
const MAX_WIDENINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelFit {
    /// y-values where the product CDF equals 0.25, 0.5 and 0.75.
    pub quartiles: [f64; 3],
    pub location: f64,
    pub scale: f64,
    /// y where the product CDF equals 1e-6; samples never fall below it.
    pub floor: f64,
}

impl GumbelFit {
    /// Inverse CDF of the fitted Gumbel, clamped at the floor.
    pub fn quantile(&self, u: f64) -> f64 {
        (self.location - self.scale * (-u.ln()).ln()).max(self.floor)
    }
}

fn ln_product_cdf(y: f64, mu: &[f64], sd: &[f64]) -> f64 {
    let mut s = 0.0;
    for (m, v) in mu.iter().zip(sd) {
        s += if *v > 0.0 {
            normal::ln_cdf((y - m) / v)
        } else if y >= *m {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    s
}

/// Solves Π Φ((y − μ)/σ) = level by bisection, widening the bracket by
/// multiples of the largest posterior std until it straddles the level.
fn solve_level(level: f64, mu: &[f64], sd: &[f64]) -> Result<f64> {
    let target = level.ln();
    let top = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = sd.iter().cloned().fold(0.0, f64::max).max(1e-12 * (1.0 + top.abs()));
    let (mut lo, mut hi) = (top - spread, top + spread);
    let mut widen = 0;
    while ln_product_cdf(lo, mu, sd) > target {
        lo -= spread * (1u64 << widen.min(50)) as f64;
        widen += 1;
        if widen > MAX_WIDENINGS {
            return Err(Error::Bracket { level });
        }
    }
    widen = 0;
    while ln_product_cdf(hi, mu, sd) < target {
        hi += spread * (1u64 << widen.min(50)) as f64;
        widen += 1;
        if widen > MAX_WIDENINGS {
            return Err(Error::Bracket { level });
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_product_cdf(mid, mu, sd) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fits the Gumbel to the product CDF of independent normals with the given
/// means and standard deviations.
pub fn fit_gumbel(mu: &[f64], sd: &[f64]) -> Result<GumbelFit> {
    if mu.is_empty() || mu.len() != sd.len() {
        return Err(Error::InvalidInput("need matching, nonempty means and deviations".into()));
    }
    let q = [
        solve_level(QUARTILE_LEVELS[0], mu, sd)?,
        solve_level(QUARTILE_LEVELS[1], mu, sd)?,
        solve_level(QUARTILE_LEVELS[2], mu, sd)?,
    ];
    let floor = solve_level(FLOOR_LEVEL, mu, sd)?;
    let g = |r: f64| (-r.ln()).ln();
    let scale = ((q[2] - q[0]) / (g(QUARTILE_LEVELS[0]) - g(QUARTILE_LEVELS[2]))).max(0.0);
    let location = q[1] + scale * g(QUARTILE_LEVELS[1]);
    Ok(GumbelFit { quartiles: q, location, scale, floor })
}

/// Draws `n_samples` max values from the Gumbel fitted at the candidates'
/// target-fidelity posterior.
pub fn sample_max_values_gumbel(
    model: &FittedModel,
    candidates: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("candidate set is empty".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let target = model.target();
    let mut mu = Vec::with_capacity(candidates.len());
    let mut sd = Vec::with_capacity(candidates.len());
    for x in candidates {
        let (m, v) = model.predict(x, target)?;
        mu.push(m);
        sd.push(v.sqrt());
    }
    let fit = fit_gumbel(&mu, &sd)?;
    let mut rng = stream_from_seed(seed);
    Ok((0..n_samples)
        .map(|_| {
            // open interval keeps ln(−ln u) finite
            let u = rng.random::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            fit.quantile(u)
        })
        .collect())
}
