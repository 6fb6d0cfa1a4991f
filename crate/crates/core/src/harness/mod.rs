//! Experiment orchestration: configuration files, the per-seed pipeline,
//! Table-style reports, and DOT diagrams of network topology.

pub mod config;
pub mod dot;
pub mod experiment;
pub mod gradcheck;
pub mod report;

pub use config::ExperimentConfig;
pub use dot::export_dot;
pub use gradcheck::{gradcheck, GradcheckTrial, GRADCHECK_SHAPES};
pub use experiment::{run_experiment, run_experiment_with_jobs, write_artifacts, SeedRun};
pub use report::{Aggregate, Architecture, ExperimentReport, SeedFailure, SeedReport, Summary};
