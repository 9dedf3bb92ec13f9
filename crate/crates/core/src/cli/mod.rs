//! Command-line front end: scenario files, artifacts, plots and subcommands.

pub mod commands;
pub mod output;
pub mod plot;
pub mod scenario;
