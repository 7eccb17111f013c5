//! Command-line driver for `coherent-rx`: argument parsing, table and CSV
//! emitters, plan files and multithreaded Monte Carlo.

pub mod cli;
pub mod commands;
pub mod error;
pub mod format;
pub mod grid;
pub mod parallel;
pub mod plan_file;

pub use error::CliError;
