//! Executes a configuration and writes traces plus a run manifest.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use mfmes_core::rng::SeedTree;
use mfmes_core::{run_sequential, simulate_async, RegretTrace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};

pub const MANIFEST_NAME: &str = "run_manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("seed {seed}: {message}")]
    Seed { seed: u64, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Seventeen significant digits; `NaN` and `inf` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn trace_file_name(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}__{}__{}__seed{seed}.csv", cfg.benchmark, cfg.method.as_str(), cfg.mode.as_str())
}

pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("seed,event_index,sim_time,cumulative_cost,fidelity");
    for i in 1..=dim {
        write!(h, ",x{i}").expect("string write");
    }
    h.push_str(",y,simple_regret,inference_regret,acq_value,wall_ms,flags");
    h
}

/// Header plus one LF-terminated row per event; fidelities are 1-based.
pub fn trace_to_csv(trace: &RegretTrace, dim: usize) -> String {
    let mut out = csv_header(dim);
    out.push('\n');
    for r in &trace.rows {
        write!(
            out,
            "{},{},{},{},{}",
            trace.seed,
            r.event_index,
            format_float(r.sim_time),
            format_float(r.cumulative_cost),
            r.m + 1
        )
        .expect("string write");
        for v in &r.x {
            write!(out, ",{}", format_float(*v)).expect("string write");
        }
        writeln!(
            out,
            ",{},{},{},{},{},{}",
            format_float(r.y),
            format_float(r.simple_regret),
            format_float(r.inference_regret),
            format_float(r.acq_value),
            format_float(r.wall_ms),
            r.flags_string()
        )
        .expect("string write");
    }
    out
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> mfmes_core::Result<RegretTrace> {
    let objective = cfg.objective(seed)?;
    let rc = cfg.run_config(seed, objective.as_ref());
    match cfg.mode {
        Mode::Sequential => run_sequential(objective.as_ref(), &rc),
        Mode::Async => simulate_async(objective.as_ref(), &rc),
    }
}

#[derive(Debug, Serialize)]
struct SeedEntry {
    seed: u64,
    rng_root: u64,
    instance_seed: u64,
    /// 64-bit summaries of the labeled child streams.
    streams: Vec<(String, u64)>,
    trace: Option<String>,
    status: &'static str,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: &'static str,
    config_hash: String,
    benchmark: String,
    method: &'static str,
    mode: &'static str,
    seeds: Vec<SeedEntry>,
    config: String,
}

#[derive(Debug)]
pub struct RunReport {
    pub traces: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub failures: Vec<RunError>,
}

/// Runs every seed (concurrently; results do not depend on scheduling) and
/// writes `output_dir/{benchmark}__{method}__{mode}__seed{seed}.csv` and
/// `output_dir/run_manifest.json`. A failing seed does not stop the others.
pub fn run(cfg: &ExperimentConfig, output_dir: &Path) -> Result<RunReport, RunError> {
    std::fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    let results: Vec<(u64, Result<PathBuf, RunError>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let r = run_seed(cfg, seed).map_err(|e| RunError::Seed { seed, message: e.to_string() }).and_then(
                |trace| {
                    let dim = trace.rows.first().map_or(0, |r| r.x.len());
                    let path = output_dir.join(trace_file_name(cfg, seed));
                    write_atomic(&path, trace_to_csv(&trace, dim).as_bytes())?;
                    Ok(path)
                },
            );
            (seed, r)
        })
        .collect();

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut entries = Vec::new();
    for (seed, r) in results {
        let tree = SeedTree::new(seed);
        let streams = ["lhs-init", "candidates", "rfm-freq"].iter().map(|l| (l.to_string(), tree.child_u64(l))).collect();
        let mut entry = SeedEntry {
            seed,
            rng_root: tree.root(),
            instance_seed: cfg.instance_seed(seed),
            streams,
            trace: None,
            status: "ok",
            error: None,
        };
        match r {
            Ok(p) => {
                entry.trace = p.file_name().map(|n| n.to_string_lossy().into_owned());
                traces.push(p);
            }
            Err(e) => {
                entry.status = "error";
                entry.error = Some(e.to_string());
                failures.push(e);
            }
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        version: VERSION,
        config_hash: cfg.hash(),
        benchmark: cfg.benchmark.clone(),
        method: cfg.method.as_str(),
        mode: cfg.mode.as_str(),
        seeds: entries,
        config: cfg.to_canonical_toml(),
    };
    let path = output_dir.join(MANIFEST_NAME);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    Ok(RunReport { traces, manifest: path, failures })
}
