//! Synthetic dispersive qubit readout and state classification.
//!
//! The crate covers the whole path from a raw heterodyne record to a state
//! label:
//!
//! * [`sim`] generates raw readout shots with ring-up, decay and noise,
//! * [`demod`] turns them into I/Q points or sliced trajectories,
//! * [`nn`] is a small dense network engine with Adam and early stopping,
//! * [`classifiers`] holds the GMM, FFNN and autoencoder-pretrained (PreTraNN)
//!   classifiers,
//! * [`metrics`] computes per-state accuracy and confusion matrices.

pub mod classifiers;
pub mod container;
pub mod demod;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sim;

pub use error::{FormatError, ReadoutError, Result};
pub use matrix::Matrix;
