//! Experiment harness around `hilbert-rwm-core`: configuration, seeded
//! parallel replica execution, sweeps over `(N, ell)`, CSV/JSON artifact
//! emission, and reproducible run manifests.

pub mod calibration;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};
pub use experiments::run_experiment;
