//! Perturbation studies: how much noise it takes to change a torsion verdict.

use rand::Rng;
use serde::{Deserialize, Serialize};
use torsionscope_core::pointcloud::{apply_activation, perturb_gaussian};
use torsionscope_core::rng::derived;
use torsionscope_core::{reduce, Activation, Coefficients, Error, PointCloud, Result, Selection, TorsionFinding};

use crate::scan::{diagram_distances, Audit, DiagramDistances, TorsionScan};

/// Coefficients of the diagrams compared against the original cloud.
pub const COMPARISON_FIELD: Coefficients = Coefficients::Prime(2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragilityConfig {
    pub sigma: f64,
    pub max_rounds: usize,
    pub seed: u64,
    pub scan: TorsionScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragilityRound {
    pub round: usize,
    /// The torsion event whose simplex was shifted this round.
    pub target: TorsionFinding,
    pub shifted_now: Vec<usize>,
    pub shifted_total: usize,
    pub shifted_fraction: f64,
    /// Mean squared displacement from the original cloud.
    pub mse: f64,
    pub distances: DiagramDistances,
    pub label_after: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragilityTrace {
    pub n_points: usize,
    pub radius: f64,
    pub initial_label: String,
    pub rounds: Vec<FragilityRound>,
    pub torsion_free: bool,
    pub final_label: String,
}

impl FragilityTrace {
    pub fn shifted_fraction(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.shifted_fraction)
    }
}

/// Repeatedly shifts the vertices of the first torsion simplex until the
/// detector no longer finds torsion or `max_rounds` is reached.
pub fn fragility_study(cloud: &PointCloud, config: &FragilityConfig) -> Result<FragilityTrace> {
    let scan = &config.scan;
    let fixed = scan.pinned_to(cloud);
    let radius = fixed.radius_for(cloud);
    let mut filtration = fixed.filtration(cloud)?;
    let mut report = fixed.check_filtration(&filtration)?;
    if !report.has_torsion {
        return Err(Error::NotTorsional(format!("no torsion at radius {radius}")));
    }
    let initial_label = report.label();
    let original = reduce(&filtration, COMPARISON_FIELD, 1)?;
    let mut current = cloud.clone();
    let mut shifted = std::collections::BTreeSet::new();
    let mut rounds = Vec::new();
    for round in 1..=config.max_rounds {
        let target = *report.first().expect("torsional report has a finding");
        let vertices = filtration.simplex(target.first_index).vertices().to_vec();
        let seed = derived(config.seed, round as u64).random::<u64>();
        let (moved, _) = perturb_gaussian(&current, &Selection::Indices(vertices.clone()), config.sigma, seed)?;
        current = moved;
        shifted.extend(vertices.iter().copied());
        filtration = fixed.filtration(&current)?;
        report = fixed.check_filtration(&filtration)?;
        let diagram = reduce(&filtration, COMPARISON_FIELD, 1)?;
        rounds.push(FragilityRound {
            round,
            target,
            shifted_now: vertices,
            shifted_total: shifted.len(),
            shifted_fraction: shifted.len() as f64 / cloud.len() as f64,
            mse: cloud.mean_squared_displacement(&current)?,
            distances: diagram_distances(&original, &diagram, radius),
            label_after: report.label(),
        });
        if !report.has_torsion {
            break;
        }
    }
    Ok(FragilityTrace {
        n_points: cloud.len(),
        radius,
        initial_label,
        rounds,
        torsion_free: !report.has_torsion,
        final_label: report.label(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub scan: TorsionScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTrial {
    pub trial: usize,
    pub mse: f64,
    pub audit: Audit,
    pub primes: Vec<u64>,
    pub changed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub original_label: String,
    pub original_primes: Vec<u64>,
    pub trials: Vec<SensitivityTrial>,
    pub changed_trials: Vec<usize>,
}

/// Perturbs every point independently in each trial and records which
/// primes the detector reports.
pub fn prime_sensitivity_study(cloud: &PointCloud, config: &SensitivityConfig) -> Result<SensitivityReport> {
    if !(config.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {}", config.sigma)));
    }
    let fixed = config.scan.pinned_to(cloud);
    let original = fixed.check(cloud)?;
    let original_primes = original.primes();
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let seed = derived(config.seed, trial as u64).random::<u64>();
        let (moved, record) = perturb_gaussian(cloud, &Selection::All, config.sigma, seed)?;
        let audit = fixed.audit(&moved)?;
        let primes = audit.report().map(|r| r.primes()).unwrap_or_default();
        let changed = audit.report().is_some() && primes != original_primes;
        trials.push(SensitivityTrial { trial, mse: record.mse, audit, primes, changed });
    }
    let changed_trials = trials.iter().filter(|t| t.changed).map(|t| t.trial).collect();
    Ok(SensitivityReport { original_label: original.label(), original_primes, trials, changed_trials })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationOutcome {
    pub activation: Activation,
    pub radius: f64,
    pub audit: Audit,
}

/// Applies each activation coordinatewise and audits the image. The scan
/// scale is taken relative to each image so that squashing maps are
/// compared at the same proportion of their extent.
pub fn activation_sweep(cloud: &PointCloud, activations: &[Activation], scan: &TorsionScan) -> Result<Vec<ActivationOutcome>> {
    activations
        .iter()
        .map(|&activation| {
            let image = apply_activation(cloud, activation);
            Ok(ActivationOutcome { activation, radius: scan.radius_for(&image), audit: scan.audit(&image)? })
        })
        .collect()
}
