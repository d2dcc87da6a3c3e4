//! Per-event regret traces.

use crate::benchmarks::MultiFidelityObjective;

pub const FLAG_INIT: &str = "init";
pub const FLAG_FAILED: &str = "failed";
pub const FLAG_REFIT: &str = "refit";

/// One completed evaluation. Fidelities are 0-based here.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub event_index: usize,
    pub sim_time: f64,
    pub cumulative_cost: f64,
    pub x: Vec<f64>,
    pub m: usize,
    /// NaN for failed evaluations.
    pub y: f64,
    pub simple_regret: f64,
    pub inference_regret: f64,
    /// Acquisition score that selected this query; NaN for initial points.
    pub acq_value: f64,
    pub wall_ms: f64,
    pub flags: Vec<&'static str>,
    /// Maximizer of the target posterior mean once this row's data is in.
    pub recommendation: Option<Vec<f64>>,
}

impl TraceRow {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.contains(&flag)
    }

    pub fn flags_string(&self) -> String {
        self.flags.join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub seed: u64,
    pub benchmark: String,
    pub optimum: f64,
    pub n_fidelities: usize,
    pub rows: Vec<TraceRow>,
}

impl RegretTrace {
    pub fn final_simple_regret(&self) -> Option<f64> {
        self.rows.last().map(|r| r.simple_regret)
    }

    /// Cost spent after the initial design.
    pub fn total_cost(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_cost)
    }
}

/// Optimum minus the best target-fidelity value seen so far. Initial rows
/// all carry the best value of the whole initial design.
pub fn simple_regret(trace: &RegretTrace, objective: &dyn MultiFidelityObjective) -> Vec<f64> {
    let target = objective.n_fidelities() - 1;
    let opt = objective.optimum().value;
    let is_target = |r: &TraceRow| r.m == target && r.y.is_finite();
    let mut best = trace
        .rows
        .iter()
        .filter(|r| r.has_flag(FLAG_INIT) && is_target(r))
        .map(|r| r.y)
        .fold(f64::NEG_INFINITY, f64::max);
    trace
        .rows
        .iter()
        .map(|r| {
            if is_target(r) {
                best = best.max(r.y);
            }
            (opt - best).max(0.0)
        })
        .collect()
}

/// Optimum minus the true target value at each row's recommendation,
/// never above the simple regret. Rows without a recommendation get the
/// simple regret.
pub fn inference_regret(trace: &RegretTrace, objective: &dyn MultiFidelityObjective) -> Vec<f64> {
    let target = objective.n_fidelities() - 1;
    let opt = objective.optimum().value;
    simple_regret(trace, objective)
        .into_iter()
        .zip(&trace.rows)
        .map(|(sr, r)| match &r.recommendation {
            Some(x) => match objective.evaluate(x, target) {
                Ok(v) => (opt - v).max(0.0).min(sr),
                Err(_) => sr,
            },
            None => sr,
        })
        .collect()
}
