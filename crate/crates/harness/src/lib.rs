//! Experiment runner behind the `nsrl` CLI: configuration parsing and
//! validation, per-seed runs, sweeps, replay and the CSV/JSON artifacts.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use error::HarnessError;
