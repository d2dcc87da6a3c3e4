//! Command-line front end: configuration files, trace files and summaries.

pub mod config;
pub mod runner;
pub mod summary;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use runner::{run, RunError, RunReport};
pub use summary::{summarize, Axis, Summary};

/// Overrides the configured output directory when set.
pub const OUTPUT_DIR_ENV: &str = "MFMES_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
