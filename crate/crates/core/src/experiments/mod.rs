//! Named experiments, configuration handling, and CSV/JSON artifact
//! emission for the command-line harness.

mod config;
mod runner;

pub use config::{
    EllipticRunConfig, EulerConfig, ExperimentConfig, FlowConfig, PendulumConfig, QpConfig,
    ScalarConfig, Table1Config,
};
pub use runner::{list_experiments, run_experiment, self_check};
