//! Library half of the `urlflow` binary: run configuration, command
//! implementations, and the posteriors/manifest file schemas. The binary in
//! `main.rs` is a thin argument parser over [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod posteriors;

pub use config::RunConfig;
pub use error::CliError;
