use crate::error::{Error, Result};

/// Hyperparameters of the semiparametric latent factor model (SLFM) kernel
///
/// ```text
/// k((x,m),(x',m')) = Σ_c (w[c][m]·w[c][m'] + κ[c][m]·δ(m=m')) · k_c(x,x')
/// k_c(x,x')        = exp(−Σ_i (x_i − x'_i)² / (2ℓ[c][i]²))
/// ```
///
/// Fidelities are indexed from 0 (cheapest) to `M − 1` (the target).
#[derive(Debug, Clone, PartialEq)]
pub struct SlfmHyperparams {
    /// `[latent][dimension]`, all > 0.
    pub lengthscales: Vec<Vec<f64>>,
    /// `[latent][fidelity]`
    pub weights: Vec<Vec<f64>>,
    /// `[latent][fidelity]`, all ≥ 0.
    pub kappas: Vec<Vec<f64>>,
    pub noise_variance: f64,
}

pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-6;
pub const DEFAULT_LATENT_COUNT: usize = 2;

impl SlfmHyperparams {
    pub fn new(
        lengthscales: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        kappas: Vec<Vec<f64>>,
        noise_variance: f64,
    ) -> Result<Self> {
        let h = Self { lengthscales, weights, kappas, noise_variance };
        h.validate()?;
        Ok(h)
    }

    /// Same lengthscale in every dimension, same weights and κ for every latent.
    pub fn isotropic(
        dim: usize,
        lengthscale: f64,
        weights: Vec<Vec<f64>>,
        kappas: Vec<Vec<f64>>,
        noise_variance: f64,
    ) -> Result<Self> {
        let c = weights.len();
        Self::new(vec![vec![lengthscale; dim]; c], weights, kappas, noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.lengthscales.len();
        if c == 0 {
            return Err(Error::InvalidInput("SLFM needs at least one latent function".into()));
        }
        if self.weights.len() != c || self.kappas.len() != c {
            return Err(Error::InvalidInput("lengthscales, weights and kappas disagree on latent count".into()));
        }
        let d = self.lengthscales[0].len();
        let m = self.weights[0].len();
        if d == 0 || m == 0 {
            return Err(Error::InvalidInput("empty input dimension or fidelity set".into()));
        }
        for latent in 0..c {
            if self.lengthscales[latent].len() != d {
                return Err(Error::InvalidInput("ragged lengthscale table".into()));
            }
            if self.weights[latent].len() != m || self.kappas[latent].len() != m {
                return Err(Error::InvalidInput("ragged weight or kappa table".into()));
            }
            if self.lengthscales[latent].iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return Err(Error::InvalidInput("lengthscales must be strictly positive".into()));
            }
            if self.kappas[latent].iter().any(|&k| !(k >= 0.0) || !k.is_finite()) {
                return Err(Error::InvalidInput("kappas must be nonnegative".into()));
            }
            if self.weights[latent].iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidInput("weights must be finite".into()));
            }
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidInput("noise variance must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn latent_count(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn dim(&self) -> usize {
        self.lengthscales[0].len()
    }

    pub fn n_fidelities(&self) -> usize {
        self.weights[0].len()
    }

    /// w[c][m]·w[c][m'] + κ[c][m]·δ(m = m')
    #[inline]
    pub fn coregion(&self, c: usize, m: usize, m2: usize) -> f64 {
        let w = &self.weights[c];
        let k = if m == m2 { self.kappas[c][m] } else { 0.0 };
        w[m] * w[m2] + k
    }

    /// k((x,m),(x,m)), the prior variance at fidelity m.
    pub fn prior_variance(&self, m: usize) -> f64 {
        (0..self.latent_count()).map(|c| self.coregion(c, m, m)).sum()
    }

    /// Writes k_c(x, x') for every latent into `out`.
    #[inline]
    pub(crate) fn latent_kernels(&self, x: &[f64], x2: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let ls = &self.lengthscales[c];
            let mut s = 0.0;
            for i in 0..x.len() {
                let d = (x[i] - x2[i]) / ls[i];
                s += d * d;
            }
            *o = (-0.5 * s).exp();
        }
    }

    #[inline]
    pub(crate) fn combine(&self, latent: &[f64], m: usize, m2: usize) -> f64 {
        latent.iter().enumerate().map(|(c, &k)| self.coregion(c, m, m2) * k).sum()
    }

    fn check_point(&self, x: &[f64], m: usize) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if m >= self.n_fidelities() {
            return Err(Error::FidelityOutOfRange { fidelity: m, n_fidelities: self.n_fidelities() });
        }
        Ok(())
    }
}

/// SLFM kernel value between (x, m) and (x2, m2).
pub fn kernel_eval(x: &[f64], m: usize, x2: &[f64], m2: usize, theta: &SlfmHyperparams) -> Result<f64> {
    theta.check_point(x, m)?;
    theta.check_point(x2, m2)?;
    let mut latent = vec![0.0; theta.latent_count()];
    theta.latent_kernels(x, x2, &mut latent);
    Ok(theta.combine(&latent, m, m2))
}
