//! Experiment definitions and the commands behind the `heatsrc` binary.

pub mod commands;
pub mod config;
pub mod selftest;

pub use commands::{cmd_forward, cmd_reconstruct, cmd_refine, refinement_study, RunManifest};
pub use config::ExperimentConfig;
pub use selftest::{run_selftest, SelftestOptions, SuiteOutcome};
