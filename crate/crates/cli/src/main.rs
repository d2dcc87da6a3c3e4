use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfmes_cli::summary::{summary_to_csv, Axis};
use mfmes_cli::{load_config, run, summarize, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "mfmes", version, about = "Multi-fidelity max-value entropy search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration and write traces.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Median and quartile regret curves over trace files.
    Summarize {
        /// Glob patterns of trace files.
        #[arg(required = true)]
        patterns: Vec<String>,
        #[arg(long)]
        grid: f64,
        #[arg(long, default_value = "cost")]
        axis: String,
        /// Last grid point; defaults to the longest trace.
        #[arg(long)]
        max: Option<f64>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a configuration and print its canonical form.
    Validate { config: PathBuf },
    /// List the available benchmarks.
    BenchList,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return exit(code);
        }
    };
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(c) => {
                print!("{}", c.to_canonical_toml());
                exit(EXIT_OK)
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                exit(EXIT_INVALID)
            }
        },
        Command::BenchList => {
            for (name, what) in mfmes_core::benchmarks::describe() {
                println!("{name:<20} {what}");
            }
            exit(EXIT_OK)
        }
        Command::Run { config, output } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return exit(EXIT_INVALID);
                }
            };
            let dir = output
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| cfg.output_dir.clone());
            match run(&cfg, &dir) {
                Ok(report) => {
                    for p in &report.traces {
                        println!("{}", p.display());
                    }
                    println!("{}", report.manifest.display());
                    for f in &report.failures {
                        eprintln!("error: {f}");
                    }
                    exit(if report.failures.is_empty() { EXIT_OK } else { EXIT_RUNTIME })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(EXIT_RUNTIME)
                }
            }
        }
        Command::Summarize { patterns, grid, axis, max, output } => {
            let axis: Axis = match axis.parse() {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(EXIT_INVALID);
                }
            };
            let mut paths = Vec::new();
            for p in &patterns {
                match glob::glob(p) {
                    Ok(entries) => paths.extend(entries.filter_map(Result::ok)),
                    Err(e) => {
                        eprintln!("error: bad pattern {p}: {e}");
                        return exit(EXIT_INVALID);
                    }
                }
            }
            paths.sort();
            paths.dedup();
            let summary = match summarize(&paths, grid, axis, max) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(EXIT_INVALID);
                }
            };
            let csv = summary_to_csv(&summary);
            match output {
                Some(path) => match mfmes_cli::runner::write_atomic(&path, csv.as_bytes()) {
                    Ok(()) => exit(EXIT_OK),
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit(EXIT_RUNTIME)
                    }
                },
                None => {
                    print!("{csv}");
                    exit(EXIT_OK)
                }
            }
        }
    }
}
