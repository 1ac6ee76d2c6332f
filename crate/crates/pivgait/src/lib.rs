//! Scenario files, run artifacts and the reproduction table for the
//! pivoting-gait simulator in [`pivgait_core`].

pub mod config;
pub mod output;
pub mod repro;

pub use config::{load_scenario, parse_scenario, ConfigError, Override};
