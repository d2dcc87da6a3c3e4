use std::sync::OnceLock;

use super::{check_input, search_optimum, MultiFidelityObjective, Optimum};
use crate::acquisition::CostVector;
use crate::benchmarks::design::halton;
use crate::error::Result;

/// Two-fidelity Styblinski–Tang on [−5, 5]². With `negate` the objective
/// is −f, so the conventional minimum becomes a maximum.
pub struct StyblinskiTang {
    negate: bool,
    bounds: Vec<(f64, f64)>,
    costs: CostVector,
    optimum: OnceLock<Optimum>,
}

pub const ST_GRID: usize = 1001;

impl StyblinskiTang {
    pub fn new(negate: bool) -> Self {
        Self {
            negate,
            bounds: vec![(-5.0, 5.0); 2],
            costs: CostVector::new(vec![1.0, 5.0]).expect("valid costs"),
            optimum: OnceLock::new(),
        }
    }

    /// The printed formula, without sign flip or bounds checks.
    pub fn raw(x: &[f64], m: usize) -> f64 {
        let (a, b, c) = if m == 0 { (0.9, 15.0, 6.0) } else { (1.0, 16.0, 5.0) };
        0.5 * x.iter().map(|v| a * v.powi(4) - b * v * v + c * v).sum::<f64>()
    }
}

impl MultiFidelityObjective for StyblinskiTang {
    fn name(&self) -> &str {
        "styblinski-tang"
    }
    fn dim(&self) -> usize {
        2
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
        let v = Self::raw(x, m);
        Ok(if self.negate { -v } else { v })
    }
    fn optimum(&self) -> &Optimum {
        self.optimum.get_or_init(|| {
            let s = if self.negate { -1.0 } else { 1.0 };
            let f = |x: &[f64]| s * Self::raw(x, 1);
            let step = 10.0 / (ST_GRID - 1) as f64;
            let grid = (0..ST_GRID * ST_GRID)
                .map(move |k| vec![-5.0 + (k / ST_GRID) as f64 * step, -5.0 + (k % ST_GRID) as f64 * step]);
            search_optimum(&f, &self.bounds, grid, 4, 400)
        })
    }
}

/// Three-fidelity Hartmann6 on [0, 1]⁶; lower fidelities shift α by −0.2 and −0.1.
pub struct Hartmann6 {
    negate: bool,
    bounds: Vec<(f64, f64)>,
    costs: CostVector,
    optimum: OnceLock<Optimum>,
}

pub const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
pub const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
pub const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
pub const HARTMANN_SEARCH_POINTS: usize = 1_000_000;

impl Hartmann6 {
    pub fn new(negate: bool) -> Self {
        Self {
            negate,
            bounds: vec![(0.0, 1.0); 6],
            costs: CostVector::new(vec![1.0, 3.0, 5.0]).expect("valid costs"),
            optimum: OnceLock::new(),
        }
    }

    pub fn raw(x: &[f64], m: usize) -> f64 {
        let shift = [0.2, 0.1, 0.0][m];
        let mut s = 0.0;
        for i in 0..4 {
            let e: f64 = (0..6).map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2)).sum();
            s += (HARTMANN_ALPHA[i] - shift) * (-e).exp();
        }
        -s
    }
}

impl MultiFidelityObjective for Hartmann6 {
    fn name(&self) -> &str {
        "hartmann6"
    }
    fn dim(&self) -> usize {
        6
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
        let v = Self::raw(x, m);
        Ok(if self.negate { -v } else { v })
    }
    fn optimum(&self) -> &Optimum {
        self.optimum.get_or_init(|| {
            let s = if self.negate { -1.0 } else { 1.0 };
            let f = |x: &[f64]| s * Self::raw(x, 2);
            let pts = halton(HARTMANN_SEARCH_POINTS, 6, 1).into_iter();
            search_optimum(&f, &self.bounds, pts, 8, 2000)
        })
    }
}
