//! Experiment configuration, run loops, sweeps and on-disk outputs.

mod config;
mod output;
mod run;
mod sweep;

pub use config::{ExperimentConfig, NoiseConfig, PolicyKind};
pub use output::{write_outputs, AGGREGATE_FILE, CONFIG_FILE, PROBE_FILE, STEPS_FILE, SUMMARY_FILE};
pub use run::{run_experiment, run_labeled, RunResult, PREFERENCE_SEED_OFFSET};
pub use sweep::{run_sweep, SweepParam, SweepSpec};
