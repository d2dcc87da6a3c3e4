//! Multi-fidelity GP regression with the SLFM kernel.

pub mod hyperopt;
pub mod kernel;

pub use hyperopt::{optimize_hyperparams, optimize_hyperparams_from, HyperBounds};
pub use kernel::{kernel_eval, SlfmHyperparams, DEFAULT_LATENT_COUNT, DEFAULT_NOISE_VARIANCE};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{backward_solve_transposed, cholesky_jittered, forward_solve};
use crate::normal::HALF_LN_2PI;

/// A training triplet. `m` is 0-based; `M − 1` is the target fidelity.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub m: usize,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, m: usize, y: f64) -> Self {
        Self { x, m, y }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    obs: Vec<Observation>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_observations(obs: Vec<Observation>) -> Result<Self> {
        let mut d = Self::new();
        for o in obs {
            d.push(o)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, o: Observation) -> Result<()> {
        if let Some(first) = self.obs.first() {
            if first.x.len() != o.x.len() {
                return Err(Error::DimensionMismatch { expected: first.x.len(), got: o.x.len() });
            }
        }
        if !o.y.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observation contains a non-finite value".into()));
        }
        self.obs.push(o);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn dim(&self) -> Option<usize> {
        self.obs.first().map(|o| o.x.len())
    }

    pub fn ys(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.y).collect()
    }

    /// Copy with every y mapped through `f`.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { obs: self.obs.iter().map(|o| Observation { y: f(o.y), ..o.clone() }).collect() }
    }
}

/// Affine standardization of the outputs. A zero spread maps to std 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn from_values(ys: &[f64]) -> Self {
        if ys.is_empty() {
            return Self::identity();
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self { mean, std: if std > 0.0 && std.is_finite() { std } else { 1.0 } }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Predictive moments at (x, m) and at (x, M) together with their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMoments {
    pub mu_m: f64,
    pub mu_target: f64,
    pub var_m: f64,
    pub var_target: f64,
    pub cov: f64,
}

impl JointMoments {
    /// Clamps variances at 0 and rescales the covariance onto the
    /// Cauchy–Schwarz bound if roundoff pushed it outside.
    pub(crate) fn sanitized(mut self) -> Self {
        self.var_m = self.var_m.max(0.0);
        self.var_target = self.var_target.max(0.0);
        let bound = self.var_m * self.var_target;
        if self.cov * self.cov > bound * (1.0 + 1e-8) {
            self.cov = self.cov.signum() * bound.sqrt();
        }
        self
    }
}

/// Moments at (x, m) and (x, M) conditioned on the values f_Q at pending
/// points. The conditional means are `base + gain·(f_Q − mu_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub base_mu_m: f64,
    pub base_mu_target: f64,
    pub mu_q: Vec<f64>,
    /// Row 0 belongs to (x, m), row 1 to (x, M).
    pub gain: [Vec<f64>; 2],
    pub cond_var_m: f64,
    pub cond_var_target: f64,
    pub cond_cov: f64,
}

impl ConditionalMoments {
    pub fn conditional_means(&self, f_q: &[f64]) -> (f64, f64) {
        let mut a = self.base_mu_m;
        let mut b = self.base_mu_target;
        for j in 0..self.mu_q.len() {
            let d = f_q[j] - self.mu_q[j];
            a += self.gain[0][j] * d;
            b += self.gain[1][j] * d;
        }
        (a, b)
    }

    pub fn as_joint(&self, f_q: &[f64]) -> JointMoments {
        let (mu_m, mu_target) = self.conditional_means(f_q);
        JointMoments {
            mu_m,
            mu_target,
            var_m: self.cond_var_m,
            var_target: self.cond_var_target,
            cov: self.cond_cov,
        }
    }
}

/// A GP fitted to a dataset: training inputs, the Cholesky factor of
/// K + σ²I and the weights C⁻¹y. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedModel {
    theta: SlfmHyperparams,
    xs: Vec<f64>,
    ms: Vec<usize>,
    y: DVector<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Latent kernel values k_c(x, x_i) for every training point, row-major n×C.
#[derive(Debug, Clone)]
pub struct LatentRow(Vec<f64>);

fn gram(xs: &[f64], ms: &[usize], theta: &SlfmHyperparams) -> DMatrix<f64> {
    let n = ms.len();
    let d = theta.dim();
    let c = theta.latent_count();
    let mut latent = vec![0.0; c];
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            theta.latent_kernels(&xs[i * d..(i + 1) * d], &xs[j * d..(j + 1) * d], &mut latent);
            let v = theta.combine(&latent, ms[i], ms[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn check_dataset(dataset: &Dataset, theta: &SlfmHyperparams) -> Result<()> {
    for o in dataset.observations() {
        if o.x.len() != theta.dim() {
            return Err(Error::DimensionMismatch { expected: theta.dim(), got: o.x.len() });
        }
        if o.m >= theta.n_fidelities() {
            return Err(Error::FidelityOutOfRange { fidelity: o.m, n_fidelities: theta.n_fidelities() });
        }
    }
    Ok(())
}

/// Fits the GP. The dataset must be nonempty.
pub fn fit(dataset: &Dataset, theta: &SlfmHyperparams) -> Result<FittedModel> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot fit a GP to an empty dataset".into()));
    }
    FittedModel::build(dataset, theta)
}

/// Log evidence −½yᵀC⁻¹y − ½log|C| − (n/2)log 2π.
pub fn log_marginal_likelihood(dataset: &Dataset, theta: &SlfmHyperparams) -> Result<f64> {
    fit(dataset, theta).map(|m| m.log_marginal_likelihood())
}

impl FittedModel {
    /// The zero-data model; predictions are the prior.
    pub fn prior(theta: &SlfmHyperparams) -> Self {
        Self {
            theta: theta.clone(),
            xs: Vec::new(),
            ms: Vec::new(),
            y: DVector::zeros(0),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        }
    }

    fn build(dataset: &Dataset, theta: &SlfmHyperparams) -> Result<Self> {
        theta.validate()?;
        check_dataset(dataset, theta)?;
        let xs: Vec<f64> = dataset.observations().iter().flat_map(|o| o.x.iter().copied()).collect();
        let ms: Vec<usize> = dataset.observations().iter().map(|o| o.m).collect();
        let y = DVector::from_vec(dataset.ys());
        let mut k = gram(&xs, &ms, theta);
        for i in 0..ms.len() {
            k[(i, i)] += theta.noise_variance;
        }
        let (chol, jitter) = cholesky_jittered(&k, "training covariance")?;
        let mut alpha = y.as_slice().to_vec();
        forward_solve(&chol, &mut alpha);
        backward_solve_transposed(&chol, &mut alpha);
        Ok(Self { theta: theta.clone(), xs, ms, y, chol, alpha: DVector::from_vec(alpha), jitter })
    }

    /// Model with one more observation, by extending the Cholesky factor.
    /// Falls back to a full refit if the extension is numerically unsafe.
    pub fn append(&self, o: &Observation) -> Result<Self> {
        if o.x.len() != self.theta.dim() {
            return Err(Error::DimensionMismatch { expected: self.theta.dim(), got: o.x.len() });
        }
        if o.m >= self.n_fidelities() {
            return Err(Error::FidelityOutOfRange { fidelity: o.m, n_fidelities: self.n_fidelities() });
        }
        let n = self.len();
        let row = self.latent_row(&o.x);
        let mut l = self.cross_vector(&row, o.m);
        forward_solve(&self.chol, &mut l);
        let kss = self.theta.prior_variance(o.m) + self.theta.noise_variance + self.jitter;
        let d2 = kss - l.iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 1e-10 * kss) {
            let mut ds = self.dataset();
            ds.push(o.clone())?;
            return Self::build(&ds, &self.theta);
        }
        let mut chol = DMatrix::zeros(n + 1, n + 1);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        for (j, v) in l.iter().enumerate() {
            chol[(n, j)] = *v;
        }
        chol[(n, n)] = d2.sqrt();
        let mut xs = self.xs.clone();
        xs.extend_from_slice(&o.x);
        let mut ms = self.ms.clone();
        ms.push(o.m);
        let mut y = self.y.as_slice().to_vec();
        y.push(o.y);
        let mut alpha = y.clone();
        forward_solve(&chol, &mut alpha);
        backward_solve_transposed(&chol, &mut alpha);
        Ok(Self {
            theta: self.theta.clone(),
            xs,
            ms,
            y: DVector::from_vec(y),
            chol,
            alpha: DVector::from_vec(alpha),
            jitter: self.jitter,
        })
    }

    pub fn hyperparams(&self) -> &SlfmHyperparams {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn n_fidelities(&self) -> usize {
        self.theta.n_fidelities()
    }

    pub fn target(&self) -> usize {
        self.n_fidelities() - 1
    }

    /// Jitter added to the diagonal on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn training_y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn training_x(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.xs[i * d..(i + 1) * d]
    }

    pub fn training_m(&self, i: usize) -> usize {
        self.ms[i]
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            obs: (0..self.len())
                .map(|i| Observation::new(self.training_x(i).to_vec(), self.ms[i], self.y[i]))
                .collect(),
        }
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let fit = self.y.dot(&self.alpha);
        let logdet: f64 = self.chol.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * fit - logdet - n * HALF_LN_2PI
    }

    fn check_input(&self, x: &[f64], m: usize) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if m >= self.n_fidelities() {
            return Err(Error::FidelityOutOfRange { fidelity: m, n_fidelities: self.n_fidelities() });
        }
        Ok(())
    }

    /// Latent kernels between x and each training input. Shared across
    /// fidelities so that one pass serves every (x, m).
    pub fn latent_row(&self, x: &[f64]) -> LatentRow {
        let c = self.theta.latent_count();
        let d = self.dim();
        let mut out = vec![0.0; self.len() * c];
        for i in 0..self.len() {
            self.theta.latent_kernels(x, &self.xs[i * d..(i + 1) * d], &mut out[i * c..(i + 1) * c]);
        }
        LatentRow(out)
    }

    /// k_n^(m)(x) from a latent row.
    pub fn cross_vector(&self, row: &LatentRow, m: usize) -> Vec<f64> {
        let c = self.theta.latent_count();
        (0..self.len()).map(|i| self.theta.combine(&row.0[i * c..(i + 1) * c], m, self.ms[i])).collect()
    }

    /// Mean and L⁻¹k at (x, m) given the latent row.
    fn whitened(&self, row: &LatentRow, m: usize) -> (f64, Vec<f64>) {
        let mut k = self.cross_vector(row, m);
        let mu = k.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum();
        forward_solve(&self.chol, &mut k);
        (mu, k)
    }

    pub fn predict(&self, x: &[f64], m: usize) -> Result<(f64, f64)> {
        self.check_input(x, m)?;
        let row = self.latent_row(x);
        let (mu, v) = self.whitened(&row, m);
        let var = self.theta.prior_variance(m) - dot(&v, &v);
        Ok((mu, var.max(0.0)))
    }

    pub fn predict_joint(&self, x: &[f64], m: usize) -> Result<JointMoments> {
        self.check_input(x, m)?;
        let row = self.latent_row(x);
        Ok(self.joint_from_row(&row, m))
    }

    /// Joint moments for every fidelity at x; entry m pairs (x, m) with (x, M).
    pub fn predict_joint_all(&self, x: &[f64]) -> Result<Vec<JointMoments>> {
        self.check_input(x, 0)?;
        let row = self.latent_row(x);
        let target = self.target();
        let (mu_t, v_t) = self.whitened(&row, target);
        let var_t = self.theta.prior_variance(target) - dot(&v_t, &v_t);
        Ok((0..self.n_fidelities())
            .map(|m| {
                if m == target {
                    let v = var_t.max(0.0);
                    return JointMoments { mu_m: mu_t, mu_target: mu_t, var_m: v, var_target: v, cov: v };
                }
                let (mu_m, v_m) = self.whitened(&row, m);
                JointMoments {
                    mu_m,
                    mu_target: mu_t,
                    var_m: self.theta.prior_variance(m) - dot(&v_m, &v_m),
                    var_target: var_t,
                    cov: self.prior_cross(m, target) - dot(&v_m, &v_t),
                }
                .sanitized()
            })
            .collect())
    }

    /// Posterior mean at (x, m) only.
    pub fn predict_mean(&self, x: &[f64], m: usize) -> Result<f64> {
        self.check_input(x, m)?;
        let row = self.latent_row(x);
        let k = self.cross_vector(&row, m);
        Ok(dot(&k, self.alpha.as_slice()))
    }

    fn joint_from_row(&self, row: &LatentRow, m: usize) -> JointMoments {
        let target = self.target();
        let (mu_t, v_t) = self.whitened(row, target);
        let var_t = self.theta.prior_variance(target) - dot(&v_t, &v_t);
        if m == target {
            let v = var_t.max(0.0);
            return JointMoments { mu_m: mu_t, mu_target: mu_t, var_m: v, var_target: v, cov: v };
        }
        let (mu_m, v_m) = self.whitened(row, m);
        JointMoments {
            mu_m,
            mu_target: mu_t,
            var_m: self.theta.prior_variance(m) - dot(&v_m, &v_m),
            var_target: var_t,
            cov: self.prior_cross(m, target) - dot(&v_m, &v_t),
        }
        .sanitized()
    }

    /// k((x,m),(x,m')) at a common x.
    fn prior_cross(&self, m: usize, m2: usize) -> f64 {
        (0..self.theta.latent_count()).map(|c| self.theta.coregion(c, m, m2)).sum()
    }

    /// Prepares conditioning on the latent values at a pending set.
    pub fn pending_context(&self, pending: &[(Vec<f64>, usize)]) -> Result<PendingContext> {
        if pending.is_empty() {
            return Err(Error::InvalidInput("pending set is empty".into()));
        }
        for (x, m) in pending {
            self.check_input(x, *m)?;
        }
        let q = pending.len();
        let mut mu = Vec::with_capacity(q);
        let mut whitened = Vec::with_capacity(q);
        for (x, m) in pending {
            let row = self.latent_row(x);
            let (mu_j, v_j) = self.whitened(&row, *m);
            mu.push(mu_j);
            whitened.push(v_j);
        }
        let mut cov = DMatrix::zeros(q, q);
        let mut latent = vec![0.0; self.theta.latent_count()];
        for i in 0..q {
            for j in 0..=i {
                self.theta.latent_kernels(&pending[i].0, &pending[j].0, &mut latent);
                let v = self.theta.combine(&latent, pending[i].1, pending[j].1) - dot(&whitened[i], &whitened[j]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let (chol, _) = cholesky_jittered(&cov, "pending covariance")?;
        Ok(PendingContext { points: pending.to_vec(), mu, whitened, cov, chol })
    }

    /// Moments at (x, m), (x, M) conditioned on noiseless values at Q.
    pub fn conditional_given_pending(
        &self,
        x: &[f64],
        m: usize,
        pending: &[(Vec<f64>, usize)],
    ) -> Result<ConditionalMoments> {
        let ctx = self.pending_context(pending)?;
        self.check_input(x, m)?;
        Ok(self.conditional_all(x, &ctx)?.swap_remove(m))
    }

    /// Pending-conditioned moments for every fidelity at x.
    pub fn conditional_all(&self, x: &[f64], ctx: &PendingContext) -> Result<Vec<ConditionalMoments>> {
        self.check_input(x, 0)?;
        let row = self.latent_row(x);
        let target = self.target();
        let q = ctx.points.len();
        let mut latent = vec![0.0; self.theta.latent_count()];
        let lat_q: Vec<Vec<f64>> = ctx
            .points
            .iter()
            .map(|(xq, _)| {
                self.theta.latent_kernels(x, xq, &mut latent);
                latent.clone()
            })
            .collect();
        let per_m: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..self.n_fidelities())
            .map(|m| {
                let (mu, v) = self.whitened(&row, m);
                let cross: Vec<f64> = (0..q)
                    .map(|j| self.theta.combine(&lat_q[j], m, ctx.points[j].1) - dot(&v, &ctx.whitened[j]))
                    .collect();
                (mu, v, cross)
            })
            .collect();
        let (mu_t, v_t, cross_t) = &per_m[target];
        let mut gain_t = cross_t.clone();
        forward_solve(&ctx.chol, &mut gain_t);
        let reduce_t = dot(&gain_t, &gain_t);
        backward_solve_transposed(&ctx.chol, &mut gain_t);
        let var_t = self.theta.prior_variance(target) - dot(v_t, v_t);
        let cond_t = (var_t - reduce_t).max(0.0);

        Ok((0..self.n_fidelities())
            .map(|m| {
                if m == target {
                    return ConditionalMoments {
                        base_mu_m: *mu_t,
                        base_mu_target: *mu_t,
                        mu_q: ctx.mu.clone(),
                        gain: [gain_t.clone(), gain_t.clone()],
                        cond_var_m: cond_t,
                        cond_var_target: cond_t,
                        cond_cov: cond_t,
                    };
                }
                let (mu_m, v_m, cross_m) = &per_m[m];
                let mut white_m = cross_m.clone();
                forward_solve(&ctx.chol, &mut white_m);
                let mut white_t = cross_t.clone();
                forward_solve(&ctx.chol, &mut white_t);
                let var_m = self.theta.prior_variance(m) - dot(v_m, v_m) - dot(&white_m, &white_m);
                let cov = self.prior_cross(m, target) - dot(v_m, v_t) - dot(&white_m, &white_t);
                let mut gain_m = white_m;
                backward_solve_transposed(&ctx.chol, &mut gain_m);
                let j = JointMoments { mu_m: 0.0, mu_target: 0.0, var_m, var_target: cond_t, cov }.sanitized();
                ConditionalMoments {
                    base_mu_m: *mu_m,
                    base_mu_target: *mu_t,
                    mu_q: ctx.mu.clone(),
                    gain: [gain_m, gain_t.clone()],
                    cond_var_m: j.var_m,
                    cond_var_target: j.var_target,
                    cond_cov: j.cov,
                }
            })
            .collect())
    }
}

/// Posterior quantities of the pending set reused across candidates.
#[derive(Debug, Clone)]
pub struct PendingContext {
    points: Vec<(Vec<f64>, usize)>,
    mu: Vec<f64>,
    whitened: Vec<Vec<f64>>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl PendingContext {
    pub fn points(&self) -> &[(Vec<f64>, usize)] {
        &self.points
    }

    /// Posterior mean of f_Q.
    pub fn mean(&self) -> &[f64] {
        &self.mu
    }

    /// Posterior covariance of f_Q (before jitter).
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
