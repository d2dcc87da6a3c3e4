//! Benchmark objectives with several fidelities and known optima.

pub mod design;
pub mod functions;
pub mod synthetic;

pub use design::{candidate_set, halton, latin_hypercube, latin_hypercube_init, nearest_in_pool};
pub use functions::{Hartmann6, StyblinskiTang};
pub use synthetic::{GpSynthetic, MaterialsStandIn};

use std::sync::Arc;

use crate::acquisition::CostVector;
use crate::error::{Error, Result};
use crate::gp::SlfmHyperparams;
use crate::optim::nelder_mead_max;

/// Value and location of the maximum of the target fidelity.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub location: Vec<f64>,
}

/// A function observable at `M` fidelities; index `M − 1` is the target,
/// which the optimizer maximizes.
pub trait MultiFidelityObjective: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn n_fidelities(&self) -> usize;
    fn bounds(&self) -> &[(f64, f64)];
    fn costs(&self) -> &CostVector;
    fn evaluate(&self, x: &[f64], m: usize) -> Result<f64>;
    /// Computed on first use and cached.
    fn optimum(&self) -> &Optimum;

    /// A fixed candidate pool, for pooled problems.
    fn pool(&self) -> Option<&[Vec<f64>]> {
        None
    }

    /// Hyperparameters to use instead of fitting them.
    fn fixed_hyperparams(&self) -> Option<&SlfmHyperparams> {
        None
    }

    fn normalize_outputs(&self) -> bool {
        self.fixed_hyperparams().is_none()
    }

    /// Initial design size per fidelity.
    fn init_counts(&self) -> Vec<usize> {
        default_init_counts(self.dim(), self.n_fidelities())
    }
}

/// 5d/4d for two fidelities, 6d/3d/2d for three; a single fidelity gets 4d.
pub fn default_init_counts(d: usize, m: usize) -> Vec<usize> {
    match m {
        1 => vec![4 * d],
        2 => vec![5 * d, 4 * d],
        3 => vec![6 * d, 3 * d, 2 * d],
        _ => {
            let mut v = vec![2 * d; m];
            v[0] = 6 * d;
            v
        }
    }
}

pub(crate) fn check_input(x: &[f64], m: usize, bounds: &[(f64, f64)], n_fidelities: usize) -> Result<()> {
    if x.len() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), got: x.len() });
    }
    if m >= n_fidelities {
        return Err(Error::FidelityOutOfRange { fidelity: m, n_fidelities });
    }
    for (i, (v, (lo, hi))) in x.iter().zip(bounds).enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(Error::InvalidInput(format!("x[{i}] = {v} outside [{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// Best of `points` under `f`, then Nelder–Mead polish of the top `n_polish`.
pub(crate) fn search_optimum(
    f: &(impl Fn(&[f64]) -> f64 + Sync),
    bounds: &[(f64, f64)],
    points: impl Iterator<Item = Vec<f64>>,
    n_polish: usize,
    polish_budget: usize,
) -> Optimum {
    let to_unit = |x: &[f64]| x.iter().zip(bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect::<Vec<_>>();
    let from_unit = |u: &[f64]| u.iter().zip(bounds).map(|(v, (lo, hi))| lo + v * (hi - lo)).collect::<Vec<_>>();
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_polish + 1);
    for x in points {
        let v = f(&x);
        if top.len() < n_polish || v > top.last().map_or(f64::NEG_INFINITY, |t| t.0) {
            top.push((v, x));
            top.sort_by(|a, b| b.0.total_cmp(&a.0));
            top.truncate(n_polish.max(1));
        }
    }
    let mut best = top[0].clone();
    for (_, x) in &top {
        let g = |u: &[f64]| f(&from_unit(u));
        let (v, u) = nelder_mead_max(&g, &to_unit(x), polish_budget);
        if v > best.0 {
            best = (v, from_unit(&u));
        }
    }
    Optimum { value: best.0, location: best.1 }
}

/// The target fidelity of another objective seen as a one-fidelity problem.
pub struct SingleFidelity {
    inner: Arc<dyn MultiFidelityObjective>,
    name: String,
    costs: CostVector,
    theta: Option<SlfmHyperparams>,
}

impl SingleFidelity {
    pub fn new(inner: Arc<dyn MultiFidelityObjective>) -> Self {
        let top = inner.n_fidelities() - 1;
        let costs = CostVector::new(vec![inner.costs().get(top)]).expect("target cost is positive");
        let theta = inner.fixed_hyperparams().map(|t| SlfmHyperparams {
            lengthscales: t.lengthscales.clone(),
            weights: t.weights.iter().map(|w| vec![w[top]]).collect(),
            kappas: t.kappas.iter().map(|k| vec![k[top]]).collect(),
            noise_variance: t.noise_variance,
        });
        let name = format!("{}/target", inner.name());
        Self { inner, name, costs, theta }
    }
}

impl MultiFidelityObjective for SingleFidelity {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn n_fidelities(&self) -> usize {
        1
    }
    fn bounds(&self) -> &[(f64, f64)] {
        self.inner.bounds()
    }
    fn costs(&self) -> &CostVector {
        &self.costs
    }
    fn evaluate(&self, x: &[f64], m: usize) -> Result<f64> {
        if m != 0 {
            return Err(Error::FidelityOutOfRange { fidelity: m, n_fidelities: 1 });
        }
        self.inner.evaluate(x, self.inner.n_fidelities() - 1)
    }
    fn optimum(&self) -> &Optimum {
        self.inner.optimum()
    }
    fn pool(&self) -> Option<&[Vec<f64>]> {
        self.inner.pool()
    }
    fn fixed_hyperparams(&self) -> Option<&SlfmHyperparams> {
        self.theta.as_ref()
    }
    fn normalize_outputs(&self) -> bool {
        self.inner.normalize_outputs()
    }
}

pub const BENCHMARK_NAMES: [&str; 4] = ["styblinski-tang", "hartmann6", "gp-synthetic", "materials-standin"];

/// Looks up a benchmark by name. `instance_seed` selects the random
/// function for the generated benchmarks and is ignored otherwise.
pub fn by_name(name: &str, instance_seed: u64) -> Result<Arc<dyn MultiFidelityObjective>> {
    Ok(match name {
        "styblinski-tang" => Arc::new(StyblinskiTang::new(true)),
        "hartmann6" => Arc::new(Hartmann6::new(true)),
        "gp-synthetic" => Arc::new(GpSynthetic::new(instance_seed)?),
        "materials-standin" => Arc::new(MaterialsStandIn::new(instance_seed)?),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown benchmark '{other}' (known: {})",
                BENCHMARK_NAMES.join(", ")
            )))
        }
    })
}

/// One-line descriptions for listing.
pub fn describe() -> Vec<(&'static str, &'static str)> {
    vec![
        ("styblinski-tang", "d=2, M=2, costs (1,5), x in [-5,5]^2, maximizes -f"),
        ("hartmann6", "d=6, M=3, costs (1,3,5), x in [0,1]^6, maximizes -f"),
        ("gp-synthetic", "d=3, M=2, costs (1,5), random SLFM function drawn from the seed"),
        ("materials-standin", "d=2, M=3, costs (5,10,60), pooled 250x250 grid of a random SLFM function"),
    ]
}
