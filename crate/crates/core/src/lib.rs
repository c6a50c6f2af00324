//! Vibration fault detection: CEEMDAN decomposition of accelerometer windows
//! feeding a ten-branch multiscale 1D CNN.

pub mod ceemdan;
pub mod dataset;
pub mod emd;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod mscnn;
pub mod nn;
pub mod par;
pub mod report;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use par::Exec;
