//! Scenario runner for the `codedcache` simulator: reads a TOML scenario,
//! runs it, and writes `report.txt` and `results.csv`.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load, parse, ConfigError, Scenario};
pub use report::Outcome;
pub use runner::{run, RunError};
