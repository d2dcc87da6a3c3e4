//! Median and quartile regret curves over a set of trace files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::runner::format_float;

#[derive(Debug, thiserror::Error)]
pub enum SummaryError {
    #[error("{path}: {message}")]
    Trace { path: PathBuf, message: String },
    #[error("traces mix benchmarks: {0} and {1}")]
    MixedBenchmarks(String, String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Cost,
    Time,
}

impl Axis {
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Cost => "cumulative_cost",
            Axis::Time => "sim_time",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = SummaryError;

    fn from_str(s: &str) -> Result<Self, SummaryError> {
        match s {
            "cost" => Ok(Axis::Cost),
            "time" => Ok(Axis::Time),
            other => Err(SummaryError::Invalid(format!("unknown axis '{other}' (use cost or time)"))),
        }
    }
}

/// Fields encoded in `{benchmark}__{method}__{mode}__seed{seed}.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceName {
    pub benchmark: String,
    pub method: String,
    pub mode: String,
    pub seed: u64,
}

pub fn parse_trace_name(file_name: &str) -> Option<TraceName> {
    let stem = file_name.strip_suffix(".csv")?;
    let parts: Vec<&str> = stem.split("__").collect();
    let [benchmark, method, mode, seed] = parts.as_slice() else {
        return None;
    };
    let seed = seed.strip_prefix("seed")?.parse().ok()?;
    Some(TraceName { benchmark: benchmark.to_string(), method: method.to_string(), mode: mode.to_string(), seed })
}

/// Regret columns of one trace against the chosen axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: TraceName,
    pub axis: Vec<f64>,
    pub sr: Vec<f64>,
    pub ir: Vec<f64>,
}

impl Series {
    /// Regrets of the last event at or before `t` (right-continuous steps).
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = self.axis.partition_point(|&a| a <= t);
        let i = k.saturating_sub(1);
        (self.sr[i], self.ir[i])
    }

    pub fn end(&self) -> f64 {
        self.axis.last().copied().unwrap_or(0.0)
    }
}

pub fn read_series(path: &Path, axis: Axis) -> Result<Series, SummaryError> {
    let err = |message: String| SummaryError::Trace { path: path.to_path_buf(), message };
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = parse_trace_name(&file_name)
        .ok_or_else(|| err("file name is not {benchmark}__{method}__{mode}__seed{seed}.csv".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| err("empty file".into()))?.split(',').collect();
    let col = |c: &str| header.iter().position(|h| *h == c).ok_or_else(|| err(format!("missing column {c}")));
    let (ia, is, ii) = (col(axis.column())?, col("simple_regret")?, col("inference_regret")?);
    let mut s = Series { name, axis: Vec::new(), sr: Vec::new(), ir: Vec::new() };
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(err(format!("row {} has {} fields, header has {}", n + 1, f.len(), header.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| err(format!("row {}: {}: {e}", n + 1, header[i])));
        s.axis.push(num(ia)?);
        s.sr.push(num(is)?);
        s.ir.push(num(ii)?);
    }
    if s.axis.is_empty() {
        return Err(err("no rows".into()));
    }
    if s.axis.windows(2).any(|w| w[1] < w[0]) {
        return Err(err(format!("{} is not nondecreasing", axis.column())));
    }
    Ok(s)
}

/// Sample quantile with linear interpolation between order statistics
/// (the usual "type 7" definition). `sorted` must be ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub mode: String,
    pub axis_value: f64,
    pub n: usize,
    /// (q25, median, q75)
    pub sr: (f64, f64, f64),
    pub ir: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub benchmark: String,
    pub axis: Axis,
    pub rows: Vec<SummaryRow>,
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75))
}

/// Grid points 0, step, 2·step, ... up to `max` (default: the furthest trace end).
pub fn summarize(paths: &[PathBuf], step: f64, axis: Axis, max: Option<f64>) -> Result<Summary, SummaryError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SummaryError::Invalid(format!("grid step must be positive, got {step}")));
    }
    if paths.is_empty() {
        return Err(SummaryError::Invalid("no trace files".into()));
    }
    let series: Vec<Series> = paths.iter().map(|p| read_series(p, axis)).collect::<Result<_, _>>()?;
    let benchmark = series[0].name.benchmark.clone();
    if let Some(s) = series.iter().find(|s| s.name.benchmark != benchmark) {
        return Err(SummaryError::MixedBenchmarks(benchmark, s.name.benchmark.clone()));
    }
    let max = max.unwrap_or_else(|| series.iter().map(Series::end).fold(0.0, f64::max));
    let n_grid = (max / step + 1e-9).floor() as usize + 1;
    let mut groups: BTreeMap<(String, String), Vec<&Series>> = BTreeMap::new();
    for s in &series {
        groups.entry((s.name.method.clone(), s.name.mode.clone())).or_default().push(s);
    }
    let mut rows = Vec::new();
    for ((method, mode), members) in groups {
        for k in 0..n_grid {
            let t = k as f64 * step;
            let (sr, ir): (Vec<f64>, Vec<f64>) = members.iter().map(|s| s.at(t)).unzip();
            rows.push(SummaryRow {
                method: method.clone(),
                mode: mode.clone(),
                axis_value: t,
                n: members.len(),
                sr: quartiles(sr),
                ir: quartiles(ir),
            });
        }
    }
    Ok(Summary { benchmark, axis, rows })
}

pub fn summary_to_csv(s: &Summary) -> String {
    let mut out = format!(
        "benchmark,method,mode,{},n,sr_q25,sr_median,sr_q75,ir_q25,ir_median,ir_q75\n",
        s.axis.column()
    );
    for r in &s.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.benchmark,
            r.method,
            r.mode,
            format_float(r.axis_value),
            r.n,
            format_float(r.sr.0),
            format_float(r.sr.1),
            format_float(r.sr.2),
            format_float(r.ir.0),
            format_float(r.ir.1),
            format_float(r.ir.2),
        )
        .expect("string write");
    }
    out
}
