//! Experiment harness: configuration, seeded multi-run execution, aggregation and output.

pub mod aggregate;
pub mod chain;
pub mod config;
pub mod plot;
pub mod run;

pub use aggregate::{aggregate_runs, Metric, WindowSummary};
pub use config::{EnvConfig, ExperimentConfig, FeatureConfig, SweepConfig, SweepPoint};
pub use run::{run_experiment, write_outputs, ExperimentResult, OutputFiles};
