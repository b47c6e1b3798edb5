//! Experiment harness: torsion scans, perturbation studies, repeated
//! autoencoder trainings and the presets behind the `torsionscope` binary.

pub mod error;
pub mod presets;
pub mod reconstruction;
pub mod report;
pub mod scan;
pub mod search;
pub mod studies;

pub use error::{ExperimentError, Result};
