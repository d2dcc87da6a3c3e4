pub mod acquisition;
pub mod benchmarks;
pub mod engine;
pub mod entropy;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod normal;
pub mod optim;
pub mod parallel;
pub mod rfm;
pub mod rng;
pub mod trace;

pub use acquisition::{select_next, AcquisitionOptions, AcquisitionResult, CostVector};
pub use benchmarks::{by_name, MultiFidelityObjective, Optimum, SingleFidelity, BENCHMARK_NAMES};
pub use engine::{run_sequential, simulate_async, Budget, MaxValueSampler, RunConfig, Session};
pub use entropy::{QuadratureScheme, QuadratureSpec};
pub use error::{Error, Result};
pub use gp::{fit, Dataset, FittedModel, HyperBounds, Observation, SlfmHyperparams};
pub use rng::SeedTree;
pub use trace::{RegretTrace, TraceRow};
