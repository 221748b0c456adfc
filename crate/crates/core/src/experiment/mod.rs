//! Config-driven experiment sweeps and the diagnostic suites behind `diag`.

mod config;
pub mod diag;
mod runner;

pub use config::{
    apply_override, DatasetSpec, ExperimentConfig, ModelConfig, PartitionSpec, SurrogateConfig,
    OUTPUT_ROOT_ENV,
};
pub use runner::{
    architecture, build_partition, git_blob_sha1, prepare_data, read_results, run_dir,
    run_experiment, run_single, scenario_results, simulation_config, ExperimentReport,
    PreparedData, RunOutcome, ServerSidecar,
};
