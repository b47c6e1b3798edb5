//! Torsion scans of point clouds at a fixed Rips scale.

use serde::{Deserialize, Serialize};
use torsionscope_core::metrics::{bottleneck_intervals, wasserstein1_intervals};
use torsionscope_core::rips::enclosing_radius;
use torsionscope_core::{
    build_rips, reduce, torsion_check, Coefficients, Error, Filtration, MaxRadius, PersistenceDiagram, PointCloud,
    Result, RipsOptions, TorsionReport,
};

/// Rips scale, either in coordinate units or as a fraction of the
/// enclosing radius of the cloud being scanned.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Absolute(f64),
    Relative(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionScan {
    pub scale: Scale,
    /// Top simplex dimension of the Rips complex.
    pub max_dim: usize,
    pub primes: Vec<u64>,
    pub simplex_cap: usize,
}

impl TorsionScan {
    pub fn absolute(radius: f64, max_dim: usize, primes: &[u64], simplex_cap: usize) -> Self {
        TorsionScan { scale: Scale::Absolute(radius), max_dim, primes: primes.to_vec(), simplex_cap }
    }

    pub fn relative(fraction: f64, max_dim: usize, primes: &[u64], simplex_cap: usize) -> Self {
        TorsionScan { scale: Scale::Relative(fraction), max_dim, primes: primes.to_vec(), simplex_cap }
    }

    pub fn max_hom_dim(&self) -> usize {
        self.max_dim.saturating_sub(1)
    }

    pub fn radius_for(&self, cloud: &PointCloud) -> f64 {
        match self.scale {
            Scale::Absolute(r) => r,
            Scale::Relative(f) => f * enclosing_radius(&cloud.distance_matrix()),
        }
    }

    pub fn filtration(&self, cloud: &PointCloud) -> Result<Filtration> {
        let options = RipsOptions {
            max_dim: self.max_dim,
            max_radius: MaxRadius::Finite(self.radius_for(cloud)),
            simplex_cap: self.simplex_cap,
        };
        build_rips(cloud, &options)
    }

    /// The same scan pinned to the radius it would use on `cloud`.
    pub fn pinned_to(&self, cloud: &PointCloud) -> TorsionScan {
        TorsionScan { scale: Scale::Absolute(self.radius_for(cloud)), ..self.clone() }
    }

    pub fn check(&self, cloud: &PointCloud) -> Result<TorsionReport> {
        self.check_filtration(&self.filtration(cloud)?)
    }

    pub fn check_filtration(&self, filtration: &Filtration) -> Result<TorsionReport> {
        torsion_check(filtration, &self.primes, self.max_hom_dim())
    }

    /// Runs the check, turning an exceeded simplex cap into a skipped audit.
    pub fn audit(&self, cloud: &PointCloud) -> Result<Audit> {
        match self.check(cloud) {
            Ok(report) => Ok(Audit::checked(report)),
            Err(e @ Error::SimplexCapExceeded { .. }) => Ok(Audit::Skipped { reason: e.to_string() }),
            Err(e) => Err(e),
        }
    }

    pub fn diagram(&self, cloud: &PointCloud, coefficients: Coefficients) -> Result<PersistenceDiagram> {
        reduce(&self.filtration(cloud)?, coefficients, self.max_hom_dim())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Audit {
    Checked { label: String, report: TorsionReport },
    Skipped { reason: String },
}

impl Audit {
    pub fn checked(report: TorsionReport) -> Self {
        Audit::Checked { label: report.label(), report }
    }

    pub fn report(&self) -> Option<&TorsionReport> {
        match self {
            Audit::Checked { report, .. } => Some(report),
            Audit::Skipped { .. } => None,
        }
    }

    pub fn is_torsional(&self) -> bool {
        self.report().is_some_and(|r| r.has_torsion)
    }

    pub fn label(&self) -> String {
        match self {
            Audit::Checked { label, .. } => label.clone(),
            Audit::Skipped { .. } => "Skipped".to_string(),
        }
    }
}

/// Finite intervals of `dim` with essential classes cut off at `radius`.
pub fn truncated_intervals(diagram: &PersistenceDiagram, dim: usize, radius: f64) -> Vec<(f64, f64)> {
    let mut out = diagram.finite_intervals(dim);
    out.extend(diagram.infinite_births(dim).into_iter().filter(|&b| b < radius).map(|b| (b, radius)));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramDistances {
    pub bottleneck_h0: f64,
    pub bottleneck_h1: f64,
    pub wasserstein_h0: f64,
    pub wasserstein_h1: f64,
}

/// Distances between two truncated diagrams computed at the same radius.
pub fn diagram_distances(a: &PersistenceDiagram, b: &PersistenceDiagram, radius: f64) -> DiagramDistances {
    let pair = |dim| (truncated_intervals(a, dim, radius), truncated_intervals(b, dim, radius));
    let (a0, b0) = pair(0);
    let (a1, b1) = pair(1);
    DiagramDistances {
        bottleneck_h0: bottleneck_intervals(&a0, &b0),
        bottleneck_h1: bottleneck_intervals(&a1, &b1),
        wasserstein_h0: wasserstein1_intervals(&a0, &b0),
        wasserstein_h1: wasserstein1_intervals(&a1, &b1),
    }
}
