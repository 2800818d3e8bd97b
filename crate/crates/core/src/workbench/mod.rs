//! Configuration-driven experiment runner.
pub mod config;
pub mod fit;
pub mod run;

pub use config::{ExperimentConfig, ExperimentId};
pub use fit::{fit_slope, SlopeFit};
pub use run::{config_hash, run, run_experiment, Check, ExperimentData, Relation, RunManifest, Summary};
