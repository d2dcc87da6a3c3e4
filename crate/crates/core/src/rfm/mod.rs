//! Random-feature approximation of the SLFM prior and posterior.
//!
//! Feature vector layout: entry `(c·M + j)·D + k` of φ(x, m) is
//! `L_c[m, j]·ψ_c(x)[k]`, where `ψ_c(x) = √(2/D)·cos(Ω_c x + b_c)` and
//! `L_c L_cᵀ = w_c w_cᵀ + diag(κ_c)`.

pub mod gumbel;

pub use gumbel::{fit_gumbel, sample_max_values_gumbel, GumbelFit};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{FittedModel, SlfmHyperparams};
use crate::linalg::{backward_solve_transposed, cholesky_jittered, forward_solve};
use crate::rng::stream_from_seed;

pub const DEFAULT_BASES: usize = 1000;
const MIX_RETRY_JITTER: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RfmFeatureMap {
    theta: SlfmHyperparams,
    n_bases: usize,
    /// Per latent, D×d row-major.
    freqs: Vec<Vec<f64>>,
    phases: Vec<Vec<f64>>,
    mix: Vec<DMatrix<f64>>,
    seed: u64,
}

/// Draws the frequencies and phases from `seed` and scales them by θ. The
/// standard-normal draws do not depend on θ, so rebuilding with the same
/// seed after a hyperparameter change keeps the same random directions.
pub fn build_feature_map(theta: &SlfmHyperparams, n_bases: usize, seed: u64) -> Result<RfmFeatureMap> {
    theta.validate()?;
    if n_bases == 0 {
        return Err(Error::InvalidInput("need at least one random basis".into()));
    }
    let (c, d, m) = (theta.latent_count(), theta.dim(), theta.n_fidelities());
    let mut rng = stream_from_seed(seed);
    let mut freqs = Vec::with_capacity(c);
    let mut phases = Vec::with_capacity(c);
    for cc in 0..c {
        let ls = &theta.lengthscales[cc];
        let mut f = Vec::with_capacity(n_bases * d);
        for _ in 0..n_bases {
            for l in ls {
                let z: f64 = rng.sample(StandardNormal);
                f.push(z / l);
            }
        }
        freqs.push(f);
        phases.push((0..n_bases).map(|_| rng.random::<f64>() * 2.0 * PI).collect());
    }
    let mut mix = Vec::with_capacity(c);
    for cc in 0..c {
        let b = DMatrix::from_fn(m, m, |i, j| theta.coregion(cc, i, j));
        let l = match b.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let bj = b + DMatrix::identity(m, m) * MIX_RETRY_JITTER;
                bj.cholesky()
                    .ok_or(Error::Factorization { what: "coregionalization matrix", jitter: MIX_RETRY_JITTER })?
                    .l()
            }
        };
        mix.push(l);
    }
    Ok(RfmFeatureMap { theta: theta.clone(), n_bases, freqs, phases, mix, seed })
}

impl RfmFeatureMap {
    pub fn hyperparams(&self) -> &SlfmHyperparams {
        &self.theta
    }

    pub fn n_bases(&self) -> usize {
        self.n_bases
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn latent_count(&self) -> usize {
        self.theta.latent_count()
    }

    pub fn n_fidelities(&self) -> usize {
        self.theta.n_fidelities()
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// C·M·D
    pub fn feature_dim(&self) -> usize {
        self.latent_count() * self.n_fidelities() * self.n_bases
    }

    pub fn mixing(&self, c: usize) -> &DMatrix<f64> {
        &self.mix[c]
    }

    pub fn frequencies(&self, c: usize) -> &[f64] {
        &self.freqs[c]
    }

    pub fn phases(&self, c: usize) -> &[f64] {
        &self.phases[c]
    }

    /// ψ_c(x) written into `out` (length D).
    fn latent_features(&self, x: &[f64], c: usize, out: &mut [f64]) {
        let d = x.len();
        let scale = (2.0 / self.n_bases as f64).sqrt();
        let f = &self.freqs[c];
        for (k, o) in out.iter_mut().enumerate() {
            let w = &f[k * d..(k + 1) * d];
            let mut a = self.phases[c][k];
            for i in 0..d {
                a += w[i] * x[i];
            }
            *o = scale * a.cos();
        }
    }

    /// φ(x, m).
    pub fn features(&self, x: &[f64], m: usize) -> Result<Vec<f64>> {
        self.check(x, m)?;
        let (cn, mn, dn) = (self.latent_count(), self.n_fidelities(), self.n_bases);
        let mut psi = vec![0.0; dn];
        let mut out = vec![0.0; self.feature_dim()];
        for c in 0..cn {
            self.latent_features(x, c, &mut psi);
            for j in 0..=m {
                let l = self.mix[c][(m, j)];
                let block = &mut out[(c * mn + j) * dn..(c * mn + j + 1) * dn];
                for (o, p) in block.iter_mut().zip(&psi) {
                    *o = l * p;
                }
            }
        }
        Ok(out)
    }

    /// φ(x,m)ᵀφ(x2,m2), the feature approximation of the kernel.
    pub fn kernel_approx(&self, x: &[f64], m: usize, x2: &[f64], m2: usize) -> Result<f64> {
        let a = self.features(x, m)?;
        let b = self.features(x2, m2)?;
        Ok(a.iter().zip(&b).map(|(p, q)| p * q).sum())
    }

    fn check(&self, x: &[f64], m: usize) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if m >= self.n_fidelities() {
            return Err(Error::FidelityOutOfRange { fidelity: m, n_fidelities: self.n_fidelities() });
        }
        Ok(())
    }

    /// e_c = Σ_j L_c[m, j]·w_{c,j}, so that wᵀφ(x, m) = Σ_c e_cᵀψ_c(x).
    fn fold(&self, ws: &WeightSample, m: usize) -> Vec<f64> {
        let (cn, mn, dn) = (self.latent_count(), self.n_fidelities(), self.n_bases);
        let mut e = vec![0.0; cn * dn];
        for c in 0..cn {
            let ec = &mut e[c * dn..(c + 1) * dn];
            for j in 0..=m {
                let l = self.mix[c][(m, j)];
                if l == 0.0 {
                    continue;
                }
                let wcj = &ws.w[(c * mn + j) * dn..(c * mn + j + 1) * dn];
                for (o, w) in ec.iter_mut().zip(wcj) {
                    *o += l * w;
                }
            }
        }
        e
    }

    /// wᵀφ(x, m).
    pub fn evaluate(&self, ws: &WeightSample, x: &[f64], m: usize) -> Result<f64> {
        self.check(x, m)?;
        let pts = LatentFeatures::new(self, &[x.to_vec()])?;
        Ok(pts.value(self, ws, 0, m))
    }
}

/// A draw of the feature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample {
    pub w: Vec<f64>,
    pub seed: u64,
}

/// ψ_c(x) for a fixed set of inputs, stored `[point][latent][basis]`.
#[derive(Debug, Clone)]
pub struct LatentFeatures {
    n: usize,
    stride: usize,
    psi: Vec<f64>,
}

impl LatentFeatures {
    pub fn new(fm: &RfmFeatureMap, xs: &[Vec<f64>]) -> Result<Self> {
        let (cn, dn) = (fm.latent_count(), fm.n_bases);
        let stride = cn * dn;
        let mut psi = vec![0.0; xs.len() * stride];
        for (i, x) in xs.iter().enumerate() {
            fm.check(x, 0)?;
            for c in 0..cn {
                fm.latent_features(x, c, &mut psi[i * stride + c * dn..i * stride + (c + 1) * dn]);
            }
        }
        Ok(Self { n: xs.len(), stride, psi })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.psi[i * self.stride..(i + 1) * self.stride]
    }

    fn value_folded(&self, e: &[f64], i: usize) -> f64 {
        self.row(i).iter().zip(e).map(|(a, b)| a * b).sum()
    }

    /// wᵀφ(x_i, m).
    pub fn value(&self, fm: &RfmFeatureMap, ws: &WeightSample, i: usize, m: usize) -> f64 {
        let e = fm.fold(ws, m);
        self.value_folded(&e, i)
    }

    /// wᵀφ(x_i, m) for every stored point.
    pub fn values(&self, fm: &RfmFeatureMap, ws: &WeightSample, m: usize) -> Vec<f64> {
        let e = fm.fold(ws, m);
        (0..self.n).map(|i| self.value_folded(&e, i)).collect()
    }

    /// Maximum of wᵀφ(x, M) over the stored points and the first index attaining it.
    pub fn max_target(&self, fm: &RfmFeatureMap, ws: &WeightSample) -> (f64, usize) {
        let vals = self.values(fm, ws, fm.n_fidelities() - 1);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, v) in vals.into_iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }
}

/// Posterior over feature weights given the model's data, factorized once
/// and reused for every draw.
///
/// Draws use the dual form w = w₀ + Φᵀ(ΦΦᵀ + σ²I)⁻¹(y − Φw₀ − ε) with
/// w₀ ~ N(0, I) and ε ~ N(0, σ²I), which has mean A⁻¹Φᵀy and covariance
/// σ²A⁻¹ for A = ΦᵀΦ + σ²I but only needs an n×n factorization.
#[derive(Debug, Clone)]
pub struct PosteriorSampler<'a> {
    fm: &'a RfmFeatureMap,
    train: LatentFeatures,
    ms: Vec<usize>,
    y: Vec<f64>,
    chol: DMatrix<f64>,
    noise_sd: f64,
}

impl<'a> PosteriorSampler<'a> {
    pub fn new(model: &FittedModel, fm: &'a RfmFeatureMap) -> Result<Self> {
        if model.hyperparams() != fm.hyperparams() {
            return Err(Error::InvalidInput("feature map was built for different hyperparameters".into()));
        }
        let n = model.len();
        let xs: Vec<Vec<f64>> = (0..n).map(|i| model.training_x(i).to_vec()).collect();
        let ms: Vec<usize> = (0..n).map(|i| model.training_m(i)).collect();
        let train = LatentFeatures::new(fm, &xs)?;
        let noise = fm.theta.noise_variance;
        let (cn, dn) = (fm.latent_count(), fm.n_bases);
        let mut g = DMatrix::zeros(n, n);
        if n > 0 {
            for c in 0..cn {
                let psi = DMatrix::from_fn(n, dn, |i, k| train.psi[i * train.stride + c * dn + k]);
                let p = &psi * psi.transpose();
                let l = &fm.mix[c];
                let b = l * l.transpose();
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] += b[(ms[i], ms[j])] * p[(i, j)];
                    }
                }
            }
            for i in 0..n {
                g[(i, i)] += noise;
            }
        }
        let chol = if n > 0 { cholesky_jittered(&g, "feature-space Gram")?.0 } else { DMatrix::zeros(0, 0) };
        Ok(Self { fm, train, ms, y: model.training_y().as_slice().to_vec(), chol, noise_sd: noise.sqrt() })
    }

    pub fn feature_map(&self) -> &RfmFeatureMap {
        self.fm
    }

    pub fn sample(&self, seed: u64) -> WeightSample {
        let fm = self.fm;
        let (cn, mn, dn) = (fm.latent_count(), fm.n_fidelities(), fm.n_bases);
        let mut rng = stream_from_seed(seed);
        let mut w: Vec<f64> = (0..fm.feature_dim()).map(|_| rng.sample(StandardNormal)).collect();
        let n = self.ms.len();
        if n == 0 {
            return WeightSample { w, seed };
        }
        let prior = WeightSample { w: w.clone(), seed };
        let mut r: Vec<f64> = (0..n)
            .map(|i| {
                let eps: f64 = rng.sample(StandardNormal);
                self.y[i] - self.train.value(fm, &prior, i, self.ms[i]) - self.noise_sd * eps
            })
            .collect();
        forward_solve(&self.chol, &mut r);
        backward_solve_transposed(&self.chol, &mut r);
        for c in 0..cn {
            for (i, &vi) in r.iter().enumerate() {
                let psi = &self.train.psi[i * self.train.stride + c * dn..i * self.train.stride + (c + 1) * dn];
                for j in 0..=self.ms[i] {
                    let s = fm.mix[c][(self.ms[i], j)] * vi;
                    if s == 0.0 {
                        continue;
                    }
                    let block = &mut w[(c * mn + j) * dn..(c * mn + j + 1) * dn];
                    for (o, p) in block.iter_mut().zip(psi) {
                        *o += s * p;
                    }
                }
            }
        }
        WeightSample { w, seed }
    }
}

pub fn sample_posterior_weights(model: &FittedModel, fm: &RfmFeatureMap, seed: u64) -> Result<WeightSample> {
    Ok(PosteriorSampler::new(model, fm)?.sample(seed))
}

/// max over the candidates of wᵀφ(x, M).
pub fn sample_max_value(ws: &WeightSample, fm: &RfmFeatureMap, candidates: &[Vec<f64>]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("candidate set is empty".into()));
    }
    Ok(LatentFeatures::new(fm, candidates)?.max_target(fm, ws).0)
}

/// wᵀφ(x_j, m_j) for each pending point, from the same weights as f*.
pub fn sample_pending_values(ws: &WeightSample, fm: &RfmFeatureMap, pending: &[(Vec<f64>, usize)]) -> Result<Vec<f64>> {
    if pending.is_empty() {
        return Err(Error::InvalidInput("pending set is empty".into()));
    }
    pending.iter().map(|(x, m)| fm.evaluate(ws, x, *m)).collect()
}
