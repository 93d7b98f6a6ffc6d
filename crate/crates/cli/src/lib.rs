//! Batch front end: reads a TOML run configuration, runs one experiment and
//! writes CSV or JSON for plotting.

pub mod commands;
pub mod config;
pub mod output;
