//! Experiment orchestration: configs, seeded runs, metrics and CSV output.

pub mod agent;
pub mod config;
pub mod metrics;
pub mod run;

pub use agent::HarnessAgent;
pub use config::{
    default_hyper, Algorithm, DomainKind, DomainSpec, Hyper, HyperOverride, OracleSettings,
    RunConfig,
};
pub use metrics::{aggregate, extrapolate_oracle, moving_average, AggregateRow, RunRecord};
pub use run::{
    aggregate_files, read_records, run, run_on_instance, run_seed, seed_instance, RunSummary,
    Series,
};
