//! Benchmark harness for the secure RIS design algorithms.
//!
//! [`config`] parses scenario files, [`sweep`] runs them and [`output`]
//! writes the results. [`cli`] ties these together behind the `ris-bench`
//! binary.

pub mod cli;
pub mod config;
pub mod output;
pub mod sweep;

pub use cli::cli_main;
pub use config::{ConfigError, ScenarioConfig};
pub use sweep::{run_feasibility, run_sweep, SweepOptions, SweepRecord};
