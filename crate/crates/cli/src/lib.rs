//! Library surface of the command-line driver: configuration schemas and
//! the command implementations, kept callable so tests can run workflows
//! in-process.

pub mod commands;
pub mod config;
