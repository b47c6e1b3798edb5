//! Computational-topology kernels for studying torsion in the integral
//! persistent homology of point clouds.
//!
//! The crate is organised bottom-up:
//!
//! - [`pointcloud`]: point clouds, synthetic generators, perturbations and
//!   the linear / activation maps applied to them.
//! - [`rips`]: Vietoris–Rips filtrations and their integer boundary matrices.
//! - [`complexes`]: fixed projective-plane and Möbius triangulations.
//! - [`homology`]: persistent homology over a prime field or over the rationals.
//! - [`snf`] and [`torsion`]: Smith normal form, integral homology, and the
//!   coefficient-comparison torsion detector.
//! - [`metrics`]: bottleneck / Wasserstein distances, persistence entropy and
//!   the entropy-based feature/noise classifier.

pub mod complexes;
pub mod error;
pub mod field;
pub mod homology;
pub mod matching;
pub mod metrics;
pub mod pointcloud;
pub mod rips;
pub mod rng;
pub mod snf;
pub mod torsion;

pub use error::{Error, Result};
pub use homology::{betti_curve, euler_characteristic, reduce, Barcode, Coefficients, PersistenceDiagram, PersistencePair};
pub use pointcloud::{Activation, PerturbationRecord, PointCloud, Selection};
pub use rips::{build_rips, BoundaryMatrix, Filtration, MaxRadius, RipsOptions, Simplex};
pub use torsion::{torsion_check, IntegralHomologySummary, TorsionFinding, TorsionReport};
