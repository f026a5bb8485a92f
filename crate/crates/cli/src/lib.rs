//! Experiment runner: JSON-configured sampler runs, moment tables against
//! the quadrature reference, weight-variance reports and CSV artifacts.

pub mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod table;

pub use config::{ExperimentConfig, LinearProblemSpec, ProblemSpec};
pub use error::CliError;
pub use experiment::{
    reproduce_table, run_experiment, weight_variance_report, ReportOptions, RunSummary, TableSet,
};
pub use table::{MomentRow, MomentTable};
