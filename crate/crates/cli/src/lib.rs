//! Library side of `captool`: run configuration, run records and the
//! subcommand implementations.

pub mod commands;
pub mod config;
pub mod record;
