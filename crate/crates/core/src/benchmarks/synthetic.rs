//! Random SLFM functions drawn through the random feature map.

use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};

use super::{check_input, search_optimum, MultiFidelityObjective, Optimum};
use crate::acquisition::CostVector;
use crate::error::Result;
use crate::gp::SlfmHyperparams;
use crate::rfm::{build_feature_map, RfmFeatureMap, WeightSample};
use crate::rng::SeedTree;

pub const SYNTHETIC_BASES: usize = 1000;

/// A single prior draw f(x, m) = φ_m(x)ᵀw with w ~ N(0, I).
pub struct SlfmDraw {
    fm: RfmFeatureMap,
    ws: WeightSample,
}

impl SlfmDraw {
    pub fn new(theta: &SlfmHyperparams, n_bases: usize, seed: u64) -> Result<Self> {
        let tree = SeedTree::new(seed);
        let fm = build_feature_map(theta, n_bases, tree.child_u64("function-freq"))?;
        let mut rng = tree.stream("function-weights");
        let w = (0..fm.feature_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Self { fm, ws: WeightSample { w, seed } })
    }

    pub fn value(&self, x: &[f64], m: usize) -> Result<f64> {
        self.fm.evaluate(&self.ws, x, m)
    }

    pub fn feature_map(&self) -> &RfmFeatureMap {
        &self.fm
    }
}

/// Hyperparameters of the generated functions: one latent, w = 0.9 and
/// κ = 0.1 at every fidelity, lengthscale 0.1.
pub fn synthetic_hyperparams(dim: usize, n_fidelities: usize) -> SlfmHyperparams {
    SlfmHyperparams::new(
        vec![vec![0.1; dim]],
        vec![vec![0.9; n_fidelities]],
        vec![vec![0.1; n_fidelities]],
        crate::gp::DEFAULT_NOISE_VARIANCE,
    )
    .expect("valid synthetic hyperparameters")
}

/// d = 3, two fidelities on [0, 1]³, costs (1, 5). The model uses the
/// generating hyperparameters and raw outputs.
pub struct GpSynthetic {
    draw: SlfmDraw,
    theta: SlfmHyperparams,
    bounds: Vec<(f64, f64)>,
    costs: CostVector,
    optimum: OnceLock<Optimum>,
}

pub const GP_SYNTHETIC_GRID: usize = 41;

impl GpSynthetic {
    pub fn new(seed: u64) -> Result<Self> {
        let theta = synthetic_hyperparams(3, 2);
        Ok(Self {
            draw: SlfmDraw::new(&theta, SYNTHETIC_BASES, seed)?,
            theta,
            bounds: vec![(0.0, 1.0); 3],
            costs: CostVector::new(vec![1.0, 5.0])?,
            optimum: OnceLock::new(),
        })
    }

    pub fn draw(&self) -> &SlfmDraw {
        &self.draw
    }
}

impl MultiFidelityObjective for GpSynthetic {
    fn name(&self) -> &str {
        "gp-synthetic"
    }
    fn dim(&self) -> usize {
        3
    }
    fn n_fidelities(&self) -> usize {
        2
    }
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn costs(&self) -> &CostVector {
        &self.costs
    }
    fn evaluate(&self, x: &[f64], m: usize) -> Result<f64> {
        check_input(x, m, &self.bounds, 2)?;
        self.draw.value(x, m)
    }
    fn optimum(&self) -> &Optimum {
        self.optimum.get_or_init(|| {
            let g = GP_SYNTHETIC_GRID;
            let step = 1.0 / (g - 1) as f64;
            let grid = (0..g * g * g).map(move |k| {
                vec![(k / (g * g)) as f64 * step, ((k / g) % g) as f64 * step, (k % g) as f64 * step]
            });
            let f = |x: &[f64]| self.draw.value(x, 1).unwrap_or(f64::NEG_INFINITY);
            search_optimum(&f, &self.bounds, grid, 8, 600)
        })
    }
    fn fixed_hyperparams(&self) -> Option<&SlfmHyperparams> {
        Some(&self.theta)
    }
}

pub const MATERIALS_GRID: usize = 250;

/// Pooled stand-in for a costly simulation: a three-fidelity generated
/// function on [0, 1]², observable only on a 250 × 250 grid.
pub struct MaterialsStandIn {
    draw: SlfmDraw,
    pool: Vec<Vec<f64>>,
    bounds: Vec<(f64, f64)>,
    costs: CostVector,
    optimum: OnceLock<Optimum>,
}

impl MaterialsStandIn {
    pub fn new(seed: u64) -> Result<Self> {
        let theta = synthetic_hyperparams(2, 3);
        let g = MATERIALS_GRID;
        let step = 1.0 / (g - 1) as f64;
        let pool = (0..g * g).map(|k| vec![(k / g) as f64 * step, (k % g) as f64 * step]).collect();
        Ok(Self {
            draw: SlfmDraw::new(&theta, SYNTHETIC_BASES, seed)?,
            pool,
            bounds: vec![(0.0, 1.0); 2],
            costs: CostVector::new(vec![5.0, 10.0, 60.0])?,
            optimum: OnceLock::new(),
        })
    }
}

impl MultiFidelityObjective for MaterialsStandIn {
    fn name(&self) -> &str {
        "materials-standin"
    }
    fn dim(&self) -> usize {
        2
    }
    fn n_fidelities(&self) -> usize {
        3
    }
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn costs(&self) -> &CostVector {
        &self.costs
    }
    fn evaluate(&self, x: &[f64], m: usize) -> Result<f64> {
        check_input(x, m, &self.bounds, 3)?;
        self.draw.value(x, m)
    }
    fn optimum(&self) -> &Optimum {
        // The pool is the whole search space, so the pool maximum is exact.
        self.optimum.get_or_init(|| {
            let mut best = Optimum { value: f64::NEG_INFINITY, location: Vec::new() };
            for x in &self.pool {
                let v = self.draw.value(x, 2).unwrap_or(f64::NEG_INFINITY);
                if v > best.value {
                    best = Optimum { value: v, location: x.clone() };
                }
            }
            best
        })
    }
    fn pool(&self) -> Option<&[Vec<f64>]> {
        Some(&self.pool)
    }
    fn init_counts(&self) -> Vec<usize> {
        vec![20, 14, 6]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gp_synthetic_moments_across_instances() {
        // Empirical moments over independent draws at a fixed point should
        // match the generating kernel: var 0.91, cross-fidelity cov 0.81.
        let x = [0.3, 0.7, 0.5];
        let n = 400;
        let (mut s00, mut s11, mut s01) = (0.0, 0.0, 0.0);
        for seed in 0..n {
            let f = GpSynthetic::new(seed).unwrap();
            let (a, b) = (f.evaluate(&x, 0).unwrap(), f.evaluate(&x, 1).unwrap());
            s00 += a * a;
            s11 += b * b;
            s01 += a * b;
        }
        let n = n as f64;
        // Standard error of a second moment of a N(0, 0.91) is about 0.91·√(2/n) ≈ 0.064.
        assert!((s00 / n - 0.91).abs() < 0.2, "{}", s00 / n);
        assert!((s11 / n - 0.91).abs() < 0.2, "{}", s11 / n);
        assert!((s01 / n - 0.81).abs() < 0.2, "{}", s01 / n);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = GpSynthetic::new(5).unwrap();
        let b = GpSynthetic::new(5).unwrap();
        let c = GpSynthetic::new(6).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(a.evaluate(&x, 1).unwrap(), b.evaluate(&x, 1).unwrap());
        assert_ne!(a.evaluate(&x, 1).unwrap(), c.evaluate(&x, 1).unwrap());
    }

    #[test]
    fn materials_pool_and_optimum() {
        let f = MaterialsStandIn::new(2).unwrap();
        assert_eq!(f.pool().unwrap().len(), 62_500);
        let opt = f.optimum();
        for x in f.pool().unwrap().iter().step_by(97) {
            assert!(f.evaluate(x, 2).unwrap() <= opt.value);
        }
    }
}
