//! Synthetic-data experiments: false positive rate, power, region counts,
//! robustness to misspecified noise, pivot uniformity, and the oracle check.

pub mod config;
pub mod data;
pub mod oracle;
pub mod report;
pub mod runners;

pub use config::{DenseActivation, ExperimentConfig, NetworkSource, NoiseFamily, PivotActivation, SigmaMode};
pub use data::{generate_null_image, generate_signal_image, object_pixels, trial_rng, NoiseSampler};
pub use oracle::{run_oracle_check, OracleCase, OracleReport};
pub use report::{ExperimentReport, GroupReport, Rate, Summary, TrialRecord};
pub use runners::{
    run_breakpoint_experiment, run_cut_experiment, run_fpr_experiment, run_pivot_experiment,
    run_power_experiment, run_robustness_experiment, TrialPlan,
};
