//! Experiment configuration: a TOML file with a few optional sections.

use std::path::{Path, PathBuf};

use mfmes_core::benchmarks::{by_name, MultiFidelityObjective, SingleFidelity, BENCHMARK_NAMES};
use mfmes_core::{AcquisitionOptions, Budget, HyperBounds, MaxValueSampler, QuadratureScheme, QuadratureSpec, RunConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    MfMes,
    /// Single-fidelity MES on the target fidelity only.
    Mes,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MfMes => "mf-mes",
            Method::Mes => "mes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sequential,
    Async,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sequential => "sequential",
            Mode::Async => "async",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    #[default]
    Rfm,
    Gumbel,
}

/// Exactly one of the three limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { cost: None, iterations: Some(50), time: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub n_samples: usize,
    pub rfm_bases: usize,
    pub n_candidates: usize,
    pub sampler: Sampler,
    pub noisy: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { n_samples: 10, rfm_bases: 1000, n_candidates: 2000, sampler: Sampler::Rfm, noisy: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub half_width: f64,
    pub scheme: String,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self { nodes: q.nodes(), half_width: q.half_width(), scheme: q.scheme().as_str().to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub refit_every: usize,
    pub latent_count: usize,
    pub noise_variance: f64,
    pub hyperopt_budget: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { refit_every: 5, latent_count: 2, noise_variance: 1e-6, hyperopt_budget: 200 }
    }
}

/// Overrides of the default hyperparameter box. Lengthscale limits are
/// relative to each domain width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale_factor: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_first: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_other: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: String,
    #[serde(default)]
    pub method: Method,
    pub mode: Mode,
    #[serde(default = "one")]
    pub q: usize,
    pub seeds: Vec<u64>,
    /// Function instance for generated benchmarks; each run seed is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsConfig>,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{}`{key}`: {message}", location(.line))]
    Invalid { key: String, line: Option<usize>, message: String },
}

fn location(line: &Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Io { .. } => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Invalid { line, .. } => *line,
            ConfigError::Io { .. } => None,
        }
    }
}

/// 1-based line of `dotted` (`"acquisition.sampler"`) in `src`, if it is written there.
fn locate(src: &str, dotted: &str) -> Option<usize> {
    let (table, key) = match dotted.rsplit_once('.') {
        Some((t, k)) => (t, k),
        None => ("", dotted),
    };
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == table {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    // a section header is the best place to point at otherwise
    [dotted, table]
        .iter()
        .filter(|t| !t.is_empty())
        .find_map(|t| src.lines().position(|l| l.trim() == format!("[{t}]")))
        .map(|i| i + 1)
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// The first backquoted word in a deserializer message names the key.
fn quoted_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

fn invalid(src: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), line: locate(src, key), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            let message = e.message().to_string();
            let line = e.span().map(|s| line_of_offset(src, s.start));
            let key = quoted_key(&message)
                .or_else(|| e.span().map(|s| src[s].split('=').next().unwrap_or("").trim().to_string()))
                .unwrap_or_default();
            ConfigError::Invalid { key, line, message }
        })?;
        cfg.validate_against(src)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_against("")
    }

    fn validate_against(&self, src: &str) -> Result<(), ConfigError> {
        let err = |key: &str, msg: String| Err(invalid(src, key, msg));
        if !BENCHMARK_NAMES.contains(&self.benchmark.as_str()) {
            return err(
                "benchmark",
                format!("unknown benchmark '{}' (known: {})", self.benchmark, BENCHMARK_NAMES.join(", ")),
            );
        }
        if self.q == 0 {
            return err("q", "must be at least 1".into());
        }
        if self.mode == Mode::Sequential && self.q != 1 {
            return err("q", format!("sequential mode uses one worker, got {}", self.q));
        }
        if self.seeds.is_empty() {
            return err("seeds", "must list at least one seed".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return err("seeds", "seeds must be distinct".into());
        }
        let b = &self.budget;
        let set = b.cost.is_some() as usize + b.iterations.is_some() as usize + b.time.is_some() as usize;
        if set != 1 {
            return err("budget", "set exactly one of cost, iterations, time".into());
        }
        for (key, v) in [("budget.cost", b.cost), ("budget.time", b.time)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return err(key, format!("must be positive and finite, got {v}"));
                }
            }
        }
        let a = &self.acquisition;
        for (key, v) in [
            ("acquisition.n_samples", a.n_samples),
            ("acquisition.rfm_bases", a.rfm_bases),
            ("acquisition.n_candidates", a.n_candidates),
            ("model.refit_every", self.model.refit_every),
            ("model.latent_count", self.model.latent_count),
        ] {
            if v == 0 {
                return err(key, "must be positive".into());
            }
        }
        if a.sampler == Sampler::Gumbel && self.mode == Mode::Async {
            return err("acquisition.sampler", "gumbel samples cannot condition on pending queries; use rfm".into());
        }
        if !(self.model.noise_variance > 0.0 && self.model.noise_variance.is_finite()) {
            return err("model.noise_variance", format!("must be positive, got {}", self.model.noise_variance));
        }
        let scheme: QuadratureScheme = match self.quadrature.scheme.parse() {
            Ok(s) => s,
            Err(e) => return err("quadrature.scheme", e.to_string()),
        };
        if let Err(e) = QuadratureSpec::new(self.quadrature.nodes, self.quadrature.half_width, scheme) {
            let key = if self.quadrature.nodes < mfmes_core::entropy::quadrature::MIN_NODES {
                "quadrature.nodes"
            } else {
                "quadrature.half_width"
            };
            return err(key, e.to_string());
        }
        if let Some(bc) = &self.bounds {
            let pairs = [
                ("bounds.lengthscale_factor", bc.lengthscale_factor, true),
                ("bounds.weight_first", bc.weight_first, false),
                ("bounds.weight_other", bc.weight_other, false),
                ("bounds.kappa", bc.kappa, true),
            ];
            for (key, p, positive) in pairs {
                if let Some([lo, hi]) = p {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || (positive && lo <= 0.0) {
                        return err(key, format!("invalid interval [{lo}, {hi}]"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fully populated TOML; loading it gives back the same config.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn instance_seed(&self, seed: u64) -> u64 {
        self.instance_seed.unwrap_or(seed)
    }

    /// The objective the optimizer sees for one run seed.
    pub fn objective(&self, seed: u64) -> mfmes_core::Result<Arc<dyn MultiFidelityObjective>> {
        let base = by_name(&self.benchmark, self.instance_seed(seed))?;
        Ok(match self.method {
            Method::MfMes => base,
            Method::Mes => Arc::new(SingleFidelity::new(base)),
        })
    }

    pub fn run_config(&self, seed: u64, objective: &dyn MultiFidelityObjective) -> RunConfig {
        let budget = match (self.budget.cost, self.budget.iterations, self.budget.time) {
            (Some(c), _, _) => Budget::Cost(c),
            (_, Some(t), _) => Budget::Iterations(t),
            (_, _, Some(t)) => Budget::Time(t),
            _ => Budget::Iterations(0),
        };
        let mut rc = RunConfig::new(seed, budget);
        rc.n_samples = self.acquisition.n_samples;
        rc.rfm_bases = self.acquisition.rfm_bases;
        rc.n_candidates = self.acquisition.n_candidates;
        rc.sampler = match self.acquisition.sampler {
            Sampler::Rfm => MaxValueSampler::Rfm,
            Sampler::Gumbel => MaxValueSampler::Gumbel,
        };
        let scheme = self.quadrature.scheme.parse().unwrap_or(QuadratureScheme::GaussLegendre);
        rc.acquisition = AcquisitionOptions {
            quadrature: QuadratureSpec::new(self.quadrature.nodes, self.quadrature.half_width, scheme)
                .unwrap_or_default(),
            noisy: self.acquisition.noisy,
            keep_scores: false,
        };
        rc.refit_every = self.model.refit_every;
        rc.latent_count = self.model.latent_count;
        rc.noise_variance = self.model.noise_variance;
        rc.hyperopt_budget = self.model.hyperopt_budget;
        rc.workers = self.q;
        rc.record_wall_time = self.record_wall_time;
        rc.bounds = self.bounds.as_ref().map(|bc| {
            let mut hb = HyperBounds::for_domain(
                objective.bounds(),
                objective.n_fidelities(),
                self.model.latent_count,
                self.model.noise_variance,
            );
            if let Some([lo, hi]) = bc.lengthscale_factor {
                hb.lengthscale = objective.bounds().iter().map(|(a, b)| ((b - a) * lo, (b - a) * hi)).collect();
            }
            for (c, row) in hb.weight.iter_mut().enumerate() {
                let o = if c == 0 { bc.weight_first } else { bc.weight_other };
                if let Some([lo, hi]) = o {
                    row.iter_mut().for_each(|w| *w = (lo, hi));
                }
            }
            if let Some([lo, hi]) = bc.kappa {
                hb.kappa = (lo, hi);
            }
            hb
        });
        rc
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    ExperimentConfig::from_toml(&src)
}
