//! Sequential multi-fidelity max-value entropy search.

use rayon::prelude::*;

use crate::entropy::{
    gaussian_entropy, gaussian_entropy_noisy, lemma1_entropy, lemma1_entropy_noisy, truncnorm_entropy,
    EntropyInputs, QuadratureSpec,
};
use crate::error::{Error, Result};
use crate::gp::{FittedModel, JointMoments};

/// Posterior variances at or below this fraction of the prior variance are
/// treated as fully determined, with zero information gain.
pub const DETERMINED_REL_VAR: f64 = 1e-10;

/// Query cost per fidelity, positive and nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidInput("cost vector is empty".into()));
        }
        if costs.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput("costs must be positive and finite".into()));
        }
        if costs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("costs must be nondecreasing in fidelity".into()));
        }
        Ok(Self(costs))
    }

    pub fn get(&self, m: usize) -> f64 {
        self.0[m]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|c| c * factor).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionOptions {
    pub quadrature: QuadratureSpec,
    /// Information gain about the noisy observation instead of the latent value.
    pub noisy: bool,
    /// Keep the full `[fidelity][candidate]` score table in the result.
    pub keep_scores: bool,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        Self { quadrature: QuadratureSpec::default(), noisy: false, keep_scores: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult {
    pub index: usize,
    pub x: Vec<f64>,
    pub m: usize,
    pub value: f64,
    pub scores: Option<Vec<Vec<f64>>>,
}

/// Mean over `f_stars` of the information gain at a point with the given
/// joint moments. `prior_var_m` sets the scale below which the point counts
/// as fully determined.
pub fn info_gain_from_moments(
    j: &JointMoments,
    m_is_target: bool,
    prior_var_m: f64,
    f_stars: &[f64],
    q: &QuadratureSpec,
    noise_var: Option<f64>,
) -> Result<f64> {
    if f_stars.is_empty() {
        return Err(Error::InvalidInput("need at least one max-value sample".into()));
    }
    let floor = DETERMINED_REL_VAR * prior_var_m;
    if j.var_m <= floor || j.var_target <= floor {
        return Ok(0.0);
    }
    let mut h1 = 0.0;
    match noise_var {
        None => {
            let h0 = gaussian_entropy(j.var_m.sqrt())?;
            for &f in f_stars {
                h1 += if m_is_target {
                    truncnorm_entropy(j.mu_target, j.var_target.sqrt(), f)?
                } else {
                    lemma1_entropy(&EntropyInputs::new(*j, f), q)?
                };
            }
            Ok(h0 - h1 / f_stars.len() as f64)
        }
        Some(noise) => {
            let h0 = gaussian_entropy_noisy(j.var_m, noise);
            for &f in f_stars {
                h1 += lemma1_entropy_noisy(&EntropyInputs::with_noise(*j, f, noise), q)?;
            }
            Ok(h0 - h1 / f_stars.len() as f64)
        }
    }
}

/// H(f^(m)_x) minus the mean over F* of H(f^(m)_x | f* ).
pub fn info_gain(model: &FittedModel, x: &[f64], m: usize, f_stars: &[f64], q: &QuadratureSpec) -> Result<f64> {
    let j = model.predict_joint(x, m)?;
    let prior = model.hyperparams().prior_variance(m);
    info_gain_from_moments(&j, m == model.target(), prior, f_stars, q, None)
}

/// Argmax over the `[fidelity][candidate]` table. Ties go to the lower
/// fidelity, then the lower candidate index.
pub(crate) fn argmax_table(scores: &[Vec<f64>]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for (m, row) in scores.iter().enumerate() {
        for (i, &s) in row.iter().enumerate() {
            if s > best.2 {
                best = (m, i, s);
            }
        }
    }
    best
}

pub(crate) fn finish(
    candidates: &[Vec<f64>],
    scores: Vec<Vec<f64>>,
    keep: bool,
) -> Result<AcquisitionResult> {
    let (m, i, value) = argmax_table(&scores);
    if !value.is_finite() {
        return Err(Error::InvalidInput("no candidate received a finite score".into()));
    }
    Ok(AcquisitionResult { index: i, x: candidates[i].clone(), m, value, scores: keep.then_some(scores) })
}

/// Scores every (x, m) by information gain per unit cost and returns the best.
pub fn select_next(
    model: &FittedModel,
    candidates: &[Vec<f64>],
    f_stars: &[f64],
    costs: &CostVector,
    opts: &AcquisitionOptions,
) -> Result<AcquisitionResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("candidate set is empty".into()));
    }
    if f_stars.is_empty() {
        return Err(Error::InvalidInput("need at least one max-value sample".into()));
    }
    let mf = model.n_fidelities();
    if costs.len() != mf {
        return Err(Error::DimensionMismatch { expected: mf, got: costs.len() });
    }
    let theta = model.hyperparams();
    let noise = opts.noisy.then_some(theta.noise_variance);
    let per_candidate: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|x| -> Result<Vec<f64>> {
            let joints = model.predict_joint_all(x)?;
            joints
                .iter()
                .enumerate()
                .map(|(m, j)| {
                    let g = info_gain_from_moments(
                        j,
                        m == mf - 1,
                        theta.prior_variance(m),
                        f_stars,
                        &opts.quadrature,
                        noise,
                    )?;
                    Ok(g / costs.get(m))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = (0..mf).map(|m| per_candidate.iter().map(|row| row[m]).collect()).collect();
    finish(candidates, scores, opts.keep_scores)
}

#[cfg(test)]
mod tests;
