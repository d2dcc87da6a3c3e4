//! Optimization loops: sequential querying and a discrete-event simulation
//! of asynchronous workers.

use std::time::Instant;

use rayon::prelude::*;

use crate::acquisition::{select_next, AcquisitionOptions, AcquisitionResult};
use crate::benchmarks::{candidate_set, latin_hypercube_init, MultiFidelityObjective};
use crate::error::{Error, Result};
use crate::gp::{
    fit, optimize_hyperparams_from, Dataset, FittedModel, HyperBounds, Normalizer, Observation, SlfmHyperparams,
    DEFAULT_LATENT_COUNT, DEFAULT_NOISE_VARIANCE,
};
use crate::parallel::events::{EventQueue, PendingEntry, PendingSet};
use crate::parallel::{draw_joint_samples, sample_seed, select_with_samples};
use crate::rfm::{build_feature_map, sample_max_values_gumbel, LatentFeatures, PosteriorSampler, RfmFeatureMap};
use crate::rng::SeedTree;
use crate::trace::{RegretTrace, TraceRow, FLAG_FAILED, FLAG_INIT, FLAG_REFIT};

/// When to stop dispatching queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Total evaluation cost, counting queries in flight.
    Cost(f64),
    /// Number of queries after the initial design.
    Iterations(usize),
    /// Simulated time; in the sequential loop time is the cumulative cost.
    Time(f64),
}

impl Budget {
    fn validate(&self) -> Result<()> {
        match *self {
            Budget::Cost(b) | Budget::Time(b) if !(b.is_finite() && b >= 0.0) => {
                Err(Error::InvalidInput(format!("budget must be finite and nonnegative, got {b}")))
            }
            _ => Ok(()),
        }
    }
}

/// Source of the max-value samples f*.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxValueSampler {
    /// Maxima of random-feature posterior draws over the candidates.
    Rfm,
    /// Quantiles of a Gumbel fitted to the candidate posteriors. Sequential only.
    Gumbel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub budget: Budget,
    pub n_samples: usize,
    pub rfm_bases: usize,
    pub n_candidates: usize,
    /// Hyperparameters are refit before decision 0 and every `refit_every` decisions.
    pub refit_every: usize,
    pub latent_count: usize,
    pub noise_variance: f64,
    pub hyperopt_budget: usize,
    pub sampler: MaxValueSampler,
    pub acquisition: AcquisitionOptions,
    /// Replaces the default bounds derived from the domain.
    pub bounds: Option<HyperBounds>,
    pub workers: usize,
    /// Off by default so that traces are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl RunConfig {
    pub fn new(seed: u64, budget: Budget) -> Self {
        Self {
            seed,
            budget,
            n_samples: 10,
            rfm_bases: 1000,
            n_candidates: 2000,
            refit_every: 5,
            latent_count: DEFAULT_LATENT_COUNT,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            hyperopt_budget: 200,
            sampler: MaxValueSampler::Rfm,
            acquisition: AcquisitionOptions::default(),
            bounds: None,
            workers: 1,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        let positive = [
            ("n_samples", self.n_samples),
            ("rfm_bases", self.rfm_bases),
            ("n_candidates", self.n_candidates),
            ("refit_every", self.refit_every),
            ("latent_count", self.latent_count),
            ("workers", self.workers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidInput(format!("noise_variance must be positive, got {}", self.noise_variance)));
        }
        if self.sampler == MaxValueSampler::Gumbel && self.workers > 1 {
            return Err(Error::InvalidInput("the Gumbel sampler cannot condition on pending queries".into()));
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        Ok(())
    }
}

/// What one acquisition step chose.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub result: AcquisitionResult,
    pub refit: bool,
    pub wall_ms: f64,
}

/// Data, hyperparameters and cached model state for one optimization run.
pub struct Session<'a> {
    objective: &'a dyn MultiFidelityObjective,
    cfg: RunConfig,
    tree: SeedTree,
    data: Dataset,
    candidates: Vec<Vec<f64>>,
    bounds: HyperBounds,
    theta: SlfmHyperparams,
    fixed: bool,
    features: Option<(RfmFeatureMap, LatentFeatures)>,
    model: Option<FittedModel>,
    decisions: usize,
}

impl<'a> Session<'a> {
    /// Draws the initial design and the candidate set.
    pub fn new(objective: &'a dyn MultiFidelityObjective, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let data = latin_hypercube_init(objective, cfg.seed)?;
        let candidates = candidate_set(objective, cfg.n_candidates, cfg.seed)?;
        let bounds = match &cfg.bounds {
            Some(b) => b.clone(),
            None => HyperBounds::for_domain(
                objective.bounds(),
                objective.n_fidelities(),
                cfg.latent_count,
                cfg.noise_variance,
            ),
        };
        if bounds.dim() != objective.dim() || bounds.n_fidelities() != objective.n_fidelities() {
            return Err(Error::InvalidInput("hyperparameter bounds do not match the objective".into()));
        }
        let (theta, fixed) = match objective.fixed_hyperparams() {
            Some(t) => (t.clone(), true),
            None => (bounds.center(), false),
        };
        Ok(Self {
            objective,
            tree: SeedTree::new(cfg.seed),
            cfg,
            data,
            candidates,
            bounds,
            theta,
            fixed,
            features: None,
            model: None,
            decisions: 0,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn hyperparams(&self) -> &SlfmHyperparams {
        &self.theta
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn normalizer(&self) -> Normalizer {
        if self.objective.normalize_outputs() {
            Normalizer::from_values(&self.data.ys())
        } else {
            Normalizer::identity()
        }
    }

    fn scaled_data(&self) -> Dataset {
        let n = self.normalizer();
        self.data.map_y(|y| n.forward(y))
    }

    /// GP on the standardized data under the current hyperparameters.
    pub fn model(&mut self) -> Result<&FittedModel> {
        if self.model.is_none() {
            self.model = Some(fit(&self.scaled_data(), &self.theta)?);
        }
        Ok(self.model.as_ref().expect("just set"))
    }

    /// Adds a successful evaluation.
    pub fn observe(&mut self, x: Vec<f64>, m: usize, y: f64) -> Result<()> {
        self.data.push(Observation::new(x, m, y))?;
        self.model = None;
        Ok(())
    }

    fn maybe_refit(&mut self) -> Result<bool> {
        if self.fixed || self.decisions % self.cfg.refit_every != 0 {
            return Ok(false);
        }
        let warm = (self.decisions > 0).then(|| self.theta.clone());
        let seed = self.tree.child_u64(&format!("hyperopt:{}", self.decisions));
        let theta =
            optimize_hyperparams_from(&self.scaled_data(), &self.bounds, self.cfg.hyperopt_budget, seed, warm.as_ref())?;
        if theta != self.theta {
            self.theta = theta;
            self.model = None;
        }
        Ok(true)
    }

    fn ensure_features(&mut self) -> Result<()> {
        let stale = self.features.as_ref().is_none_or(|(fm, _)| fm.hyperparams() != &self.theta);
        if stale {
            let fm = build_feature_map(&self.theta, self.cfg.rfm_bases, self.tree.child_u64("rfm-freq"))?;
            let feats = LatentFeatures::new(&fm, &self.candidates)?;
            self.features = Some((fm, feats));
        }
        Ok(())
    }

    /// Chooses the next (x, m) given the queries still in flight.
    pub fn decide(&mut self, pending: &[(Vec<f64>, usize)]) -> Result<Decision> {
        let start = Instant::now();
        let refit = self.maybe_refit()?;
        let seed = self.tree.child_u64(&format!("weights:{}", self.decisions));
        self.model()?;
        if self.cfg.sampler == MaxValueSampler::Rfm {
            self.ensure_features()?;
        }
        let model = self.model.as_ref().expect("fitted above");
        let n = self.cfg.n_samples;
        let opts = &self.cfg.acquisition;
        let costs = self.objective.costs();
        let result = match (self.cfg.sampler, pending.is_empty()) {
            (MaxValueSampler::Gumbel, true) => {
                let f_stars = sample_max_values_gumbel(model, &self.candidates, n, seed)?;
                select_next(model, &self.candidates, &f_stars, costs, opts)?
            }
            (MaxValueSampler::Gumbel, false) => {
                return Err(Error::InvalidInput("the Gumbel sampler cannot condition on pending queries".into()))
            }
            (MaxValueSampler::Rfm, _) => {
                let (fm, feats) = self.features.as_ref().expect("built above");
                let sampler = PosteriorSampler::new(model, fm)?;
                if pending.is_empty() {
                    let f_stars: Vec<f64> =
                        (0..n).map(|s| feats.max_target(fm, &sampler.sample(sample_seed(seed, s))).0).collect();
                    select_next(model, &self.candidates, &f_stars, costs, opts)?
                } else {
                    let samples = draw_joint_samples(&sampler, feats, pending, n, seed)?;
                    let ctx = model.pending_context(pending)?;
                    select_with_samples(model, &self.candidates, &ctx, &samples, costs, opts)?
                }
            }
        };
        self.decisions += 1;
        let wall_ms = if self.cfg.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        Ok(Decision { result, refit, wall_ms })
    }

    /// Maximizer of the target posterior mean over the candidates and the
    /// observed inputs. Earlier points win ties.
    pub fn recommend(&mut self) -> Result<Vec<f64>> {
        self.model()?;
        let model = self.model.as_ref().expect("fitted above");
        let target = model.target();
        let pool: Vec<&[f64]> = self
            .candidates
            .iter()
            .map(|x| x.as_slice())
            .chain(self.data.observations().iter().map(|o| o.x.as_slice()))
            .collect();
        let means: Vec<f64> = pool.par_iter().map(|x| model.predict_mean(x, target)).collect::<Result<_>>()?;
        let mut best = 0;
        for (i, &v) in means.iter().enumerate() {
            if v > means[best] {
                best = i;
            }
        }
        Ok(pool[best].to_vec())
    }
}

/// Running regret bookkeeping shared by both loops.
struct Recorder<'a> {
    objective: &'a dyn MultiFidelityObjective,
    optimum: f64,
    best: f64,
    rows: Vec<TraceRow>,
}

impl<'a> Recorder<'a> {
    fn new(objective: &'a dyn MultiFidelityObjective, init: &Dataset) -> Self {
        let target = objective.n_fidelities() - 1;
        let optimum = objective.optimum().value;
        let best = init.observations().iter().filter(|o| o.m == target).map(|o| o.y).fold(f64::NEG_INFINITY, f64::max);
        let sr = (optimum - best).max(0.0);
        let rows = init
            .observations()
            .iter()
            .enumerate()
            .map(|(i, o)| TraceRow {
                event_index: i,
                sim_time: 0.0,
                cumulative_cost: 0.0,
                x: o.x.clone(),
                m: o.m,
                y: o.y,
                simple_regret: sr,
                inference_regret: sr,
                acq_value: f64::NAN,
                wall_ms: 0.0,
                flags: vec![FLAG_INIT],
                recommendation: None,
            })
            .collect();
        Self { objective, optimum, best, rows }
    }

    /// Evaluates, records and returns the observed value if it succeeded.
    #[allow(clippy::too_many_arguments)]
    fn complete(
        &mut self,
        session: &mut Session<'_>,
        x: Vec<f64>,
        m: usize,
        time: f64,
        cost: f64,
        acq_value: f64,
        wall_ms: f64,
        refit: bool,
    ) -> Result<()> {
        let target = self.objective.n_fidelities() - 1;
        let mut flags = Vec::new();
        if refit {
            flags.push(FLAG_REFIT);
        }
        let y = match self.objective.evaluate(&x, m) {
            Ok(y) if y.is_finite() => {
                session.observe(x.clone(), m, y)?;
                if m == target {
                    self.best = self.best.max(y);
                }
                y
            }
            _ => {
                flags.push(FLAG_FAILED);
                f64::NAN
            }
        };
        let sr = (self.optimum - self.best).max(0.0);
        let rec = session.recommend()?;
        let ir = match self.objective.evaluate(&rec, target) {
            Ok(v) if v.is_finite() => (self.optimum - v).max(0.0).min(sr),
            _ => sr,
        };
        self.rows.push(TraceRow {
            event_index: self.rows.len(),
            sim_time: time,
            cumulative_cost: cost,
            x,
            m,
            y,
            simple_regret: sr,
            inference_regret: ir,
            acq_value,
            wall_ms,
            flags,
            recommendation: Some(rec),
        });
        Ok(())
    }

    fn finish(self, seed: u64) -> RegretTrace {
        RegretTrace {
            seed,
            benchmark: self.objective.name().to_string(),
            optimum: self.optimum,
            n_fidelities: self.objective.n_fidelities(),
            rows: self.rows,
        }
    }
}

/// One query at a time: choose, evaluate, append, repeat.
pub fn run_sequential(objective: &dyn MultiFidelityObjective, cfg: &RunConfig) -> Result<RegretTrace> {
    let mut session = Session::new(objective, cfg.clone())?;
    let mut rec = Recorder::new(objective, session.data());
    let mut cost = 0.0;
    let mut iterations = 0;
    loop {
        let go = match cfg.budget {
            Budget::Cost(b) | Budget::Time(b) => cost < b,
            Budget::Iterations(t) => iterations < t,
        };
        if !go {
            break;
        }
        let d = session.decide(&[])?;
        let AcquisitionResult { x, m, value, .. } = d.result;
        cost += objective.costs().get(m);
        iterations += 1;
        rec.complete(&mut session, x, m, cost, cost, value, d.wall_ms, d.refit)?;
    }
    Ok(rec.finish(cfg.seed))
}

/// `cfg.workers` simulated workers; a query at fidelity m occupies its
/// worker for λ_m time units. The first `q` queries are chosen greedily at
/// time 0, each conditioned on those already dispatched.
pub fn simulate_async(objective: &dyn MultiFidelityObjective, cfg: &RunConfig) -> Result<RegretTrace> {
    let q = cfg.workers;
    let mut session = Session::new(objective, cfg.clone())?;
    let mut rec = Recorder::new(objective, session.data());
    let mut pending = PendingSet::new();
    let mut queue = EventQueue::new();
    let mut refits = vec![false; q];
    let mut completed_cost = 0.0;
    let mut dispatched = 0;

    let mut dispatch = |worker: usize,
                        now: f64,
                        completed_cost: f64,
                        session: &mut Session<'_>,
                        pending: &mut PendingSet,
                        queue: &mut EventQueue,
                        refits: &mut [bool]|
     -> Result<()> {
        let go = match cfg.budget {
            Budget::Cost(b) => completed_cost + pending.total_cost() < b,
            Budget::Iterations(t) => dispatched < t,
            Budget::Time(t) => now < t,
        };
        if !go {
            return Ok(());
        }
        let d = session.decide(&pending.points())?;
        let cost = objective.costs().get(d.result.m);
        pending.insert(PendingEntry {
            worker,
            x: d.result.x,
            m: d.result.m,
            dispatch_time: now,
            completion_time: now + cost,
            cost,
            acq_value: d.result.value,
            wall_ms: d.wall_ms,
        })?;
        queue.schedule(now + cost, worker)?;
        refits[worker] = d.refit;
        dispatched += 1;
        Ok(())
    };

    for w in 0..q {
        dispatch(w, 0.0, completed_cost, &mut session, &mut pending, &mut queue, &mut refits)?;
    }
    while let Some((now, w)) = queue.pop() {
        let e = pending.take(w).expect("every scheduled worker has a pending entry");
        completed_cost += e.cost;
        rec.complete(&mut session, e.x, e.m, now, completed_cost, e.acq_value, e.wall_ms, refits[w])?;
        dispatch(w, now, completed_cost, &mut session, &mut pending, &mut queue, &mut refits)?;
    }
    Ok(rec.finish(cfg.seed))
}

#[cfg(test)]
mod tests;
