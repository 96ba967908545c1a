//! Configuration-driven runner for the `fracstep` solver.

pub mod config;
pub mod run;

pub use config::{ConfigError, RunConfig, Strategy};
pub use run::{compare, execute, RunError, Summary};
