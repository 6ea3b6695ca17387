//! Configuration, CSV reporting and subcommand drivers for the `qspir` binary.

pub mod commands;
pub mod config;
pub mod opts;
