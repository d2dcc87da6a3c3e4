//! Marginal-likelihood hyperparameter search.
//!
//! Parameters are mapped into the unit cube (log scale for lengthscales and
//! κ, linear for the mixing weights) and searched with a bounded
//! Nelder–Mead from the best of several starting points.

use nalgebra::DMatrix;
use rand::Rng;

use super::{Dataset, SlfmHyperparams};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, forward_solve};
use crate::normal::HALF_LN_2PI;
use crate::optim::nelder_mead_max;
use crate::rng::stream_from_seed;

pub const N_STARTS: usize = 8;
pub const N_REFINED: usize = 2;

/// Box constraints for the SLFM hyperparameters. The noise variance is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    /// Per input dimension, shared by all latents.
    pub lengthscale: Vec<(f64, f64)>,
    /// `[latent][fidelity]`
    pub weight: Vec<Vec<(f64, f64)>>,
    pub kappa: (f64, f64),
    pub noise_variance: f64,
}

impl HyperBounds {
    /// Lengthscales within a factor 10 of each domain width, the first latent
    /// weighted in [√0.75, 1], the rest in [−√0.25, √0.25], κ in [1e-3, 1e-1].
    pub fn for_domain(bounds: &[(f64, f64)], n_fidelities: usize, latent_count: usize, noise_variance: f64) -> Self {
        let lengthscale = bounds.iter().map(|(lo, hi)| ((hi - lo) / 10.0, (hi - lo) * 10.0)).collect();
        let weight = (0..latent_count)
            .map(|c| {
                let b = if c == 0 { (0.75f64.sqrt(), 1.0) } else { (-0.25f64.sqrt(), 0.25f64.sqrt()) };
                vec![b; n_fidelities]
            })
            .collect();
        Self { lengthscale, weight, kappa: (1e-3, 1e-1), noise_variance }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_pos = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if self.lengthscale.is_empty() || self.weight.is_empty() || self.weight[0].is_empty() {
            return Err(Error::InvalidInput("empty hyperparameter bounds".into()));
        }
        if !self.lengthscale.iter().all(|&b| ok_pos(b)) || !ok_pos(self.kappa) {
            return Err(Error::InvalidInput("lengthscale and kappa bounds must be positive and ordered".into()));
        }
        let m = self.weight[0].len();
        if self.weight.iter().any(|row| row.len() != m || row.iter().any(|(lo, hi)| !(hi >= lo) || !lo.is_finite() || !hi.is_finite()))
        {
            return Err(Error::InvalidInput("weight bounds must be finite, ordered and rectangular".into()));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::InvalidInput("noise variance must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscale.len()
    }

    pub fn latent_count(&self) -> usize {
        self.weight.len()
    }

    pub fn n_fidelities(&self) -> usize {
        self.weight[0].len()
    }

    fn n_params(&self) -> usize {
        let c = self.latent_count();
        c * self.dim() + 2 * c * self.n_fidelities()
    }

    pub fn contains(&self, t: &SlfmHyperparams) -> bool {
        let tol = 1e-12;
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo * (1.0 - tol) - tol && v <= hi * (1.0 + tol) + tol;
        t.latent_count() == self.latent_count()
            && t.dim() == self.dim()
            && t.n_fidelities() == self.n_fidelities()
            && (0..self.latent_count()).all(|c| {
                (0..self.dim()).all(|i| inside(t.lengthscales[c][i], self.lengthscale[i]))
                    && (0..self.n_fidelities()).all(|m| {
                        inside(t.weights[c][m], self.weight[c][m]) && inside(t.kappas[c][m], self.kappa)
                    })
            })
    }

    /// The point at the centre of the unit cube.
    pub fn center(&self) -> SlfmHyperparams {
        self.decode(&vec![0.5; self.n_params()])
    }

    fn decode(&self, u: &[f64]) -> SlfmHyperparams {
        let log_map = |u: f64, (lo, hi): (f64, f64)| (lo.ln() + u * (hi.ln() - lo.ln())).exp();
        let lin_map = |u: f64, (lo, hi): (f64, f64)| lo + u * (hi - lo);
        let (c, d, m) = (self.latent_count(), self.dim(), self.n_fidelities());
        let mut k = 0;
        let mut next = || {
            k += 1;
            u[k - 1]
        };
        let lengthscales = (0..c).map(|_| (0..d).map(|i| log_map(next(), self.lengthscale[i])).collect()).collect();
        let weights = (0..c).map(|cc| (0..m).map(|mm| lin_map(next(), self.weight[cc][mm])).collect()).collect();
        let kappas = (0..c).map(|_| (0..m).map(|_| log_map(next(), self.kappa)).collect()).collect();
        SlfmHyperparams { lengthscales, weights, kappas, noise_variance: self.noise_variance }
    }

    fn encode(&self, t: &SlfmHyperparams) -> Vec<f64> {
        let log_inv = |v: f64, (lo, hi): (f64, f64)| {
            if hi > lo {
                ((v.ln() - lo.ln()) / (hi.ln() - lo.ln())).clamp(0.0, 1.0)
            } else {
                0.5
            }
        };
        let lin_inv = |v: f64, (lo, hi): (f64, f64)| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        let mut u = Vec::with_capacity(self.n_params());
        for c in 0..self.latent_count() {
            for i in 0..self.dim() {
                u.push(log_inv(t.lengthscales[c][i], self.lengthscale[i]));
            }
        }
        for c in 0..self.latent_count() {
            for m in 0..self.n_fidelities() {
                u.push(lin_inv(t.weights[c][m], self.weight[c][m]));
            }
        }
        for c in 0..self.latent_count() {
            for m in 0..self.n_fidelities() {
                u.push(log_inv(t.kappas[c][m], self.kappa));
            }
        }
        u
    }
}

/// Log evidence with the pairwise squared distances precomputed once.
struct Evidence {
    n: usize,
    d: usize,
    ms: Vec<usize>,
    y: Vec<f64>,
    /// Lower triangle, row-major, `d` entries per pair.
    sq: Vec<f64>,
}

impl Evidence {
    fn new(dataset: &Dataset) -> Self {
        let obs = dataset.observations();
        let n = obs.len();
        let d = obs[0].x.len();
        let mut sq = Vec::with_capacity(n * (n + 1) / 2 * d);
        for i in 0..n {
            for j in 0..=i {
                for k in 0..d {
                    let v = obs[i].x[k] - obs[j].x[k];
                    sq.push(v * v);
                }
            }
        }
        Self { n, d, ms: obs.iter().map(|o| o.m).collect(), y: dataset.ys(), sq }
    }

    fn eval(&self, t: &SlfmHyperparams) -> f64 {
        let (n, d) = (self.n, self.d);
        let c = t.latent_count();
        let inv: Vec<Vec<f64>> = t.lengthscales.iter().map(|l| l.iter().map(|v| 0.5 / (v * v)).collect()).collect();
        let mut k = DMatrix::zeros(n, n);
        let mut p = 0;
        for i in 0..n {
            for j in 0..=i {
                let s = &self.sq[p * d..(p + 1) * d];
                p += 1;
                let mut v = 0.0;
                for (cc, il) in inv.iter().enumerate().take(c) {
                    let e: f64 = s.iter().zip(il).map(|(a, b)| a * b).sum();
                    v += t.coregion(cc, self.ms[i], self.ms[j]) * (-e).exp();
                }
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += t.noise_variance;
        }
        let Ok((l, _)) = cholesky_jittered(&k, "hyperparameter search") else {
            return f64::NEG_INFINITY;
        };
        let mut a = self.y.clone();
        forward_solve(&l, &mut a);
        let fit: f64 = a.iter().map(|v| v * v).sum();
        let logdet: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
        let v = -0.5 * fit - logdet - n as f64 * HALF_LN_2PI;
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Maximizes the log marginal likelihood within `bounds`. `budget` counts
/// likelihood evaluations spent after the starting points.
pub fn optimize_hyperparams(dataset: &Dataset, bounds: &HyperBounds, budget: usize, seed: u64) -> Result<SlfmHyperparams> {
    optimize_hyperparams_from(dataset, bounds, budget, seed, None)
}

/// As [`optimize_hyperparams`], with `warm` (clamped into bounds) as the first start.
pub fn optimize_hyperparams_from(
    dataset: &Dataset,
    bounds: &HyperBounds,
    budget: usize,
    seed: u64,
    warm: Option<&SlfmHyperparams>,
) -> Result<SlfmHyperparams> {
    bounds.validate()?;
    if dataset.is_empty() {
        return Ok(warm.filter(|w| bounds.contains(w)).cloned().unwrap_or_else(|| bounds.center()));
    }
    if dataset.dim() != Some(bounds.dim()) {
        return Err(Error::DimensionMismatch { expected: bounds.dim(), got: dataset.dim().unwrap_or(0) });
    }
    if let Some(o) = dataset.observations().iter().find(|o| o.m >= bounds.n_fidelities()) {
        return Err(Error::FidelityOutOfRange { fidelity: o.m, n_fidelities: bounds.n_fidelities() });
    }
    let ev = Evidence::new(dataset);
    let objective = |u: &[f64]| ev.eval(&bounds.decode(u));
    let p = bounds.n_params();
    let mut rng = stream_from_seed(seed);
    let mut starts = vec![match warm {
        Some(w) => bounds.encode(w),
        None => vec![0.5; p],
    }];
    while starts.len() < N_STARTS {
        starts.push((0..p).map(|_| rng.random::<f64>()).collect());
    }
    let mut scored: Vec<(f64, Vec<f64>)> = starts.into_iter().map(|u| (objective(&u), u)).collect();
    // stable sort keeps the earlier start on ties
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].clone();
    let per_run = budget / N_REFINED;
    if per_run > p {
        for (_, u) in scored.iter().take(N_REFINED) {
            let (v, x) = nelder_mead_max(&objective, u, per_run);
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    Ok(bounds.decode(&best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{log_marginal_likelihood, Observation};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample_gp(t: &SlfmHyperparams, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = t.dim();
        let pts: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| ((0..d).map(|_| rng.random::<f64>()).collect(), rng.random_range(0..t.n_fidelities())))
            .collect();
        let mut k = DMatrix::from_fn(n, n, |i, j| {
            crate::gp::kernel_eval(&pts[i].0, pts[i].1, &pts[j].0, pts[j].1, t).unwrap()
        });
        for i in 0..n {
            k[(i, i)] += t.noise_variance;
        }
        let l = k.cholesky().unwrap().l();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = l * z;
        Dataset::from_observations(pts.into_iter().zip(y.iter()).map(|((x, m), &v)| Observation::new(x, m, v)).collect())
            .unwrap()
    }

    fn bounds1() -> HyperBounds {
        HyperBounds::for_domain(&[(0.0, 1.0)], 1, 1, 1e-4)
    }

    #[test]
    fn encode_decode_round_trip() {
        let b = HyperBounds::for_domain(&[(0.0, 1.0), (-5.0, 5.0)], 2, 2, 1e-6);
        let u: Vec<f64> = (0..b.n_params()).map(|i| (i as f64 + 0.5) / b.n_params() as f64).collect();
        let t = b.decode(&u);
        assert!(b.contains(&t));
        for (a, c) in b.encode(&t).iter().zip(&u) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_lengthscale() {
        let truth = SlfmHyperparams::new(vec![vec![0.2]], vec![vec![0.95]], vec![vec![0.01]], 1e-4).unwrap();
        let data = sample_gp(&truth, 200, 3);
        let got = optimize_hyperparams(&data, &bounds1(), 200, 5).unwrap();
        let ratio = got.lengthscales[0][0] / 0.2;
        assert!((0.5..=2.0).contains(&ratio), "lengthscale {}", got.lengthscales[0][0]);
    }

    #[test]
    fn result_beats_every_start_and_stays_in_bounds() {
        let b = HyperBounds::for_domain(&[(0.0, 1.0), (0.0, 1.0)], 2, 2, 1e-6);
        let truth = b.center();
        let data = sample_gp(&truth, 30, 4);
        let got = optimize_hyperparams(&data, &b, 120, 9).unwrap();
        assert!(b.contains(&got));
        let best = log_marginal_likelihood(&data, &got).unwrap();
        let center = log_marginal_likelihood(&data, &truth).unwrap();
        assert!(best >= center - 1e-9);
    }

    #[test]
    fn zero_budget_returns_a_start() {
        let b = bounds1();
        let data = sample_gp(&b.center(), 20, 6);
        let got = optimize_hyperparams(&data, &b, 0, 1).unwrap();
        let mut rng = stream_from_seed(1);
        let mut starts = vec![b.center()];
        for _ in 1..N_STARTS {
            let u: Vec<f64> = (0..b.n_params()).map(|_| rng.random::<f64>()).collect();
            starts.push(b.decode(&u));
        }
        let vals: Vec<f64> = starts.iter().map(|s| log_marginal_likelihood(&data, s).unwrap()).collect();
        let got_v = log_marginal_likelihood(&data, &got).unwrap();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((got_v - max).abs() < 1e-9);
    }

    #[test]
    fn constant_outputs() {
        let b = HyperBounds::for_domain(&[(0.0, 1.0)], 2, 2, 1e-6);
        let obs = (0..12).map(|i| Observation::new(vec![i as f64 / 11.0], i % 2, 3.0)).collect();
        let data = Dataset::from_observations(obs).unwrap();
        let got = optimize_hyperparams(&data, &b, 60, 2).unwrap();
        assert!(b.contains(&got));
    }
}
