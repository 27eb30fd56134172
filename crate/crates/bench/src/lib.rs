//! Benchmark harness for the level-set expansion solvers: seeded instance
//! generators, high-accuracy reference values, averaged metrics, the
//! regularization-path comparator and an experiment runner.

pub mod error;
pub mod experiment;
pub mod generate;
pub mod metrics;
pub mod path;
pub mod reference;
pub mod rng;

pub use error::{BenchError, Result};
pub use experiment::{execute, run_experiment, ExperimentConfig, MethodKind, MethodSpec, ResultsBundle};
pub use generate::{generate, generate_lsq, GeneratorSpec, OuterChoice};
pub use metrics::{compute_metrics, LabeledRun, MetricSeries, TimeAxis};
pub use path::{match_to_path, regularization_path, PathPoint};
pub use reference::{reference_h, reference_omega_star, reference_phi_star};
