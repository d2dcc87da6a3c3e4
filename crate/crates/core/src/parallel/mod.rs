//! Asynchronous parallel MF-MES: acquisition conditioned on pending queries.
//!
//! Given a joint draw (f*, f_Q), the entropy of f^(m)_x conditioned on the
//! pending values and on f^(M)_x ≤ f* depends only on the shifted max
//! f̃* = f* − μ^(M)_{x|f_Q} and on conditional second moments that do not
//! depend on f_Q. Each candidate therefore needs one 1-D integral per draw.

pub mod events;

pub use events::{EventQueue, PendingEntry, PendingSet};

use rayon::prelude::*;

use crate::acquisition::{finish, AcquisitionOptions, AcquisitionResult, CostVector, DETERMINED_REL_VAR};
use crate::entropy::{gaussian_entropy, gaussian_entropy_noisy, truncnorm_entropy, QuadratureSpec, TruncatedPair};
use crate::error::{Error, Result};
use crate::gp::{ConditionalMoments, FittedModel, PendingContext};
use crate::rfm::{LatentFeatures, PosteriorSampler, RfmFeatureMap};
use crate::rng::SeedTree;

/// One joint draw of the max value and the pending latent values, both
/// taken from the same feature-weight sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeSample {
    pub f_star: f64,
    pub f_q: Vec<f64>,
}

impl TildeSample {
    /// f̃* = f* − μ^(M)_{x|f_Q}.
    pub fn shifted_max(&self, cm: &ConditionalMoments) -> f64 {
        self.f_star - cm.conditional_means(&self.f_q).1
    }
}

fn pair(cm: &ConditionalMoments, f_tilde_star: f64, noise: f64) -> Result<TruncatedPair> {
    TruncatedPair::new(cm.cond_var_m + noise, cm.cond_var_target, cm.cond_cov, f_tilde_star)
}

/// η(f̃*, f̃_m): density of the centred f^(m)_x given f_Q and f^(M)_x ≤ f*.
pub fn eta_density(f_tilde_star: f64, f_tilde_m: f64, cm: &ConditionalMoments) -> Result<f64> {
    if !(cm.cond_var_m > 0.0) {
        return Err(Error::InvalidInput("conditional variance at (x, m) must be positive".into()));
    }
    Ok(pair(cm, f_tilde_star, 0.0)?.density(f_tilde_m))
}

/// Closed-form entropy of the target fidelity given f_Q and f^(M)_x ≤ f*.
pub fn target_entropy_analytic(f_tilde_star: f64, cond_var_target: f64) -> Result<f64> {
    truncnorm_entropy(0.0, cond_var_target.sqrt(), f_tilde_star)
}

/// Information gain from pending-conditioned moments, averaged over draws.
pub fn parallel_info_gain_conditional(
    cm: &ConditionalMoments,
    m_is_target: bool,
    prior_var_m: f64,
    samples: &[TildeSample],
    q: &QuadratureSpec,
    noise_var: Option<f64>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("need at least one joint sample".into()));
    }
    let floor = DETERMINED_REL_VAR * prior_var_m;
    if cm.cond_var_m <= floor || cm.cond_var_target <= floor {
        return Ok(0.0);
    }
    let mut h1 = 0.0;
    let h0 = match noise_var {
        None => {
            for s in samples {
                let t = s.shifted_max(cm);
                h1 += if m_is_target {
                    target_entropy_analytic(t, cm.cond_var_target)?
                } else {
                    pair(cm, t, 0.0)?.entropy(q)?
                };
            }
            gaussian_entropy(cm.cond_var_m.sqrt())?
        }
        Some(noise) => {
            for s in samples {
                h1 += pair(cm, s.shifted_max(cm), noise)?.entropy(q)?;
            }
            gaussian_entropy_noisy(cm.cond_var_m, noise)
        }
    };
    Ok(h0 - h1 / samples.len() as f64)
}

/// Information gain at (x, m) given the pending set, averaged over joint draws.
pub fn parallel_info_gain(
    model: &FittedModel,
    x: &[f64],
    m: usize,
    pending: &[(Vec<f64>, usize)],
    samples: &[TildeSample],
    q: &QuadratureSpec,
) -> Result<f64> {
    if pending.is_empty() {
        return Err(Error::InvalidInput("pending set is empty; use the sequential acquisition".into()));
    }
    let cm = model.conditional_given_pending(x, m, pending)?;
    if samples.iter().any(|s| s.f_q.len() != pending.len()) {
        return Err(Error::DimensionMismatch { expected: pending.len(), got: samples[0].f_q.len() });
    }
    parallel_info_gain_conditional(&cm, m == model.target(), model.hyperparams().prior_variance(m), samples, q, None)
}

/// Seed of the `s`-th weight draw under a decision seed.
pub fn sample_seed(decision_seed: u64, s: usize) -> u64 {
    SeedTree::new(decision_seed).child_u64(&s.to_string())
}

/// `n` joint draws; f* is the max of wᵀφ(x, M) over the candidates.
pub fn draw_joint_samples(
    sampler: &PosteriorSampler<'_>,
    candidates: &LatentFeatures,
    pending: &[(Vec<f64>, usize)],
    n: usize,
    decision_seed: u64,
) -> Result<Vec<TildeSample>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("candidate set is empty".into()));
    }
    let fm = sampler.feature_map();
    (0..n)
        .map(|s| {
            let ws = sampler.sample(sample_seed(decision_seed, s));
            let f_star = candidates.max_target(fm, &ws).0;
            let f_q = pending.iter().map(|(x, m)| fm.evaluate(&ws, x, *m)).collect::<Result<_>>()?;
            Ok(TildeSample { f_star, f_q })
        })
        .collect()
}

/// Scores all (x, m) against a prepared pending context and fixed draws.
pub fn select_with_samples(
    model: &FittedModel,
    candidates: &[Vec<f64>],
    ctx: &PendingContext,
    samples: &[TildeSample],
    costs: &CostVector,
    opts: &AcquisitionOptions,
) -> Result<AcquisitionResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("candidate set is empty".into()));
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
            model
                .conditional_all(x, ctx)?
                .iter()
                .enumerate()
                .map(|(m, cm)| {
                    let g = parallel_info_gain_conditional(
                        cm,
                        m == mf - 1,
                        theta.prior_variance(m),
                        samples,
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

/// Draws `n_samples` weight samples from `seed`, then selects the (x, m)
/// with the largest sample-averaged parallel information gain per unit cost.
#[allow(clippy::too_many_arguments)]
pub fn select_next_parallel(
    model: &FittedModel,
    fm: &RfmFeatureMap,
    candidates: &[Vec<f64>],
    pending: &[(Vec<f64>, usize)],
    n_samples: usize,
    costs: &CostVector,
    seed: u64,
    opts: &AcquisitionOptions,
) -> Result<AcquisitionResult> {
    if pending.is_empty() {
        return Err(Error::InvalidInput("pending set is empty; use the sequential acquisition".into()));
    }
    let sampler = PosteriorSampler::new(model, fm)?;
    let feats = LatentFeatures::new(fm, candidates)?;
    let samples = draw_joint_samples(&sampler, &feats, pending, n_samples, seed)?;
    let ctx = model.pending_context(pending)?;
    select_with_samples(model, candidates, &ctx, &samples, costs, opts)
}

#[cfg(test)]
mod tests;
