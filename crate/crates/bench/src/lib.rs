//! Experiment harness around `qubit_readout`: dataset files, the accuracy
//! benchmark over measurement windows, latent-size and dataset-size sweeps,
//! latent probes and report comparison.

pub mod benchmark;
pub mod compare;
pub mod config;
pub mod data;
pub mod error;
pub mod formats;
pub mod generate;
pub mod probe;
pub mod report;
pub mod sweeps;

pub use config::{ExperimentConfig, Method};
pub use error::{BenchError, Result};
