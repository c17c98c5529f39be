//! Batch front end for the buck converter model: scenario files, trace
//! files, comparison and plotting.

pub mod commands;
pub mod plot;
pub mod scenario;

pub use commands::{compare, plot as plot_trace, run_scenario, simulate_to_csv, CliError};
pub use scenario::{Engine, MonitorKind, Scenario, ScenarioError};
