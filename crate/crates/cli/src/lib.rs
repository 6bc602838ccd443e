//! Command-line front end: sampling, single optimizer runs and benchmark
//! suites, writing CSV and JSON reports.

pub mod bench;
pub mod commands;
pub mod output;
pub mod run;

pub use commands::{execute, Cli, Command, UsageError};
