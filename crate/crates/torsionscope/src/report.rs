//! Running a manifest and writing its output directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use torsionscope_core::pointcloud::apply_linear;

use crate::error::Result;
use crate::presets::{Manifest, PresetConfig};
use crate::reconstruction::{
    reconstruction_experiment, tune_weight, ReconstructionReport, RunArtifacts, ScreenReport, TORSIONAL_BOARD,
};
use crate::scan::Audit;
use crate::search::SearchResult;
use crate::studies::{activation_sweep, fragility_study, prime_sensitivity_study, ActivationOutcome, FragilityTrace, SensitivityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMapOutcome {
    pub name: String,
    pub audit: Audit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudExperiment {
    pub cloud_id: usize,
    pub report: ReconstructionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Fragility {
        trace: FragilityTrace,
        activation_sweep: Vec<ActivationOutcome>,
        linear_maps: Vec<LinearMapOutcome>,
    },
    PrimeSensitivity {
        report: SensitivityReport,
    },
    Reconstruction {
        search: Option<SearchResult>,
        weight: f64,
        report: ReconstructionReport,
    },
    Highdim {
        screen: ScreenReport,
        experiments: Vec<CloudExperiment>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub manifest: Manifest,
    pub body: ReportBody,
}

/// A finished preset together with the trained models behind it.
#[derive(Debug)]
pub struct Outcome {
    pub report: ExperimentReport,
    /// Trained models keyed by the file stem used for their outputs.
    pub artifacts: Vec<(String, RunArtifacts)>,
    pub inputs: Vec<(String, Array2<f64>)>,
}

pub fn run_manifest(manifest: &Manifest) -> Result<Outcome> {
    let mut artifacts = Vec::new();
    let mut inputs = Vec::new();
    let body = match &manifest.config {
        PresetConfig::Fragility { data, study, sweep_data, activations, sweep_scan, linear_maps, linear_scan } => {
            let cloud = data.load()?;
            let trace = fragility_study(&cloud, study)?;
            let sweep_cloud = sweep_data.load()?;
            let activation_sweep = activation_sweep(&sweep_cloud, activations, sweep_scan)?;
            let linear_maps = linear_maps
                .iter()
                .map(|m| {
                    let image = apply_linear(&sweep_cloud, &m.matrix)?;
                    Ok(LinearMapOutcome { name: m.name.clone(), audit: linear_scan.audit(&image)? })
                })
                .collect::<Result<Vec<_>>>()?;
            ReportBody::Fragility { trace, activation_sweep, linear_maps }
        }
        PresetConfig::PrimeSensitivity { data, study } => {
            ReportBody::PrimeSensitivity { report: prime_sensitivity_study(&data.load()?, study)? }
        }
        PresetConfig::Reconstruction { data, experiment, search } => {
            let cloud = data.load()?;
            let mut config = experiment.clone();
            let search = match search {
                Some(spec) => {
                    let name = spec.range.name.clone();
                    let result = tune_weight(&cloud, experiment, spec.range.clone(), spec.n_calls)?;
                    config.weight = result.best[&name];
                    Some(result)
                }
                None => None,
            };
            let (report, runs) = reconstruction_experiment(&cloud, &config)?;
            inputs.push(("input".to_string(), torsionscope_learn::cloud_to_array(&cloud)));
            artifacts.extend(report.runs.iter().zip(runs).map(|(r, a)| (format!("run_{:03}", r.run_id), a)));
            ReportBody::Reconstruction { search, weight: config.weight, report }
        }
        PresetConfig::Highdim { screen, experiment, max_experiments } => {
            let screened = crate::reconstruction::highdim_screen(screen)?;
            let mut experiments = Vec::new();
            for &cloud_id in screened.torsional.iter().take(*max_experiments) {
                let seed = screened.outcomes[cloud_id].seed;
                let cloud = torsionscope_core::pointcloud::generate_random_cloud(screen.n_points, screen.dim, seed)?;
                let config = crate::reconstruction::ReconstructionConfig {
                    output_scan: screen.scan.pinned_to(&cloud),
                    ..experiment.clone()
                };
                let (mut report, runs) = reconstruction_experiment(&cloud, &config)?;
                let stem = format!("cloud_{cloud_id:04}");
                for (record, art) in report.runs.iter_mut().zip(runs) {
                    let name = format!("{stem}_run_{:03}", record.run_id);
                    record.checkpoint = format!("runs/{name}.model.json");
                    artifacts.push((name, art));
                }
                inputs.push((stem, torsionscope_learn::cloud_to_array(&cloud)));
                experiments.push(CloudExperiment { cloud_id, report });
            }
            ReportBody::Highdim { screen: screened, experiments }
        }
    };
    Ok(Outcome { report: ExperimentReport { manifest: manifest.clone(), body }, artifacts, inputs })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_matrix_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn loss_names(report: &ReconstructionReport) -> Vec<String> {
    let mut names: Vec<String> = report
        .runs
        .first()
        .map(|r| r.final_losses.terms.iter().map(|t| t.name.clone()).collect())
        .unwrap_or_default();
    names.push("total".into());
    names
}

fn leaderboard_rows(prefix: &[String], report: &ReconstructionReport, names: &[String]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (board, entries) in &report.leaderboards {
        for e in entries {
            let mut row = prefix.to_vec();
            row.extend([board.clone(), e.rank.to_string(), e.run_id.to_string()]);
            row.extend(names.iter().map(|n| cell(e.losses.get(n).copied().flatten())));
            row.extend([e.output_torsion.clone(), e.latent_torsion.clone()]);
            rows.push(row);
        }
    }
    rows
}

fn loss_vs_run_rows(prefix: &[String], report: &ReconstructionReport, names: &[String]) -> Vec<Vec<String>> {
    report
        .runs
        .iter()
        .map(|r| {
            let mut row = prefix.to_vec();
            row.push(r.run_id.to_string());
            row.extend(names.iter().map(|n| cell(r.loss(n))));
            row.extend([
                (r.output_torsion.is_torsional() as u8).to_string(),
                (r.latent_torsion.is_torsional() as u8).to_string(),
                r.output_torsion.label(),
            ]);
            row
        })
        .collect()
}

fn history_rows(prefix: &[String], report: &ReconstructionReport, names: &[String]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in &report.runs {
        for e in &r.history.epochs {
            let mut row = prefix.to_vec();
            row.extend([r.run_id.to_string(), e.epoch.to_string(), e.learning_rate.to_string()]);
            row.extend(names.iter().map(|n| cell(if n == "total" { Some(e.losses.total) } else { e.losses.get(n) })));
            rows.push(row);
        }
    }
    rows
}

/// Runs shown as scatter dumps: the best MSE runs and the best torsional ones.
fn scatter_runs(report: &ReconstructionReport) -> BTreeSet<usize> {
    ["mse", TORSIONAL_BOARD]
        .iter()
        .filter_map(|b| report.leaderboards.get(*b))
        .flat_map(|rows| rows.iter().map(|r| r.run_id))
        .collect()
}

fn write_scatter(path: &Path, input: &Array2<f64>, art: &RunArtifacts) -> Result<()> {
    let mut header = Vec::new();
    for (tag, m) in [("x", input), ("y", &art.output), ("z", &art.latent)] {
        header.extend((0..m.ncols()).map(|j| format!("{tag}{j}")));
    }
    let rows = (0..input.nrows()).map(|i| {
        [input, &art.output, &art.latent].iter().flat_map(|m| m.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>()).collect()
    });
    write_matrix_csv(path, &header, rows)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes `report.json`, `manifest.json`, `leaderboard.csv` (training
/// presets), `runs/` and `plots/` under `dir`. No timestamps or absolute
/// paths are written, so reruns of a manifest produce identical files.
pub fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<()> {
    let runs_dir = dir.join("runs");
    let plots_dir = dir.join("plots");
    fs::create_dir_all(&runs_dir)?;
    fs::create_dir_all(&plots_dir)?;
    let report = &outcome.report;
    write_json(&dir.join("manifest.json"), &report.manifest)?;
    write_json(&dir.join("report.json"), report)?;

    match &report.body {
        ReportBody::Fragility { trace, activation_sweep, linear_maps } => {
            for r in &trace.rounds {
                write_json(&runs_dir.join(format!("round_{:03}.json", r.round)), r)?;
            }
            let header = strings(&[
                "round",
                "shifted_total",
                "shifted_fraction",
                "mse",
                "bottleneck_h0",
                "bottleneck_h1",
                "wasserstein_h0",
                "wasserstein_h1",
                "label_after",
            ]);
            let rows = trace.rounds.iter().map(|r| {
                let d = &r.distances;
                vec![
                    r.round.to_string(),
                    r.shifted_total.to_string(),
                    r.shifted_fraction.to_string(),
                    r.mse.to_string(),
                    d.bottleneck_h0.to_string(),
                    d.bottleneck_h1.to_string(),
                    d.wasserstein_h0.to_string(),
                    d.wasserstein_h1.to_string(),
                    r.label_after.clone(),
                ]
            });
            write_matrix_csv(&plots_dir.join("fragility_trace.csv"), &header, rows)?;
            let rows = activation_sweep
                .iter()
                .map(|o| vec![o.activation.to_string(), o.radius.to_string(), o.audit.label()])
                .chain(linear_maps.iter().map(|m| vec![m.name.clone(), String::new(), m.audit.label()]));
            write_matrix_csv(&plots_dir.join("map_audits.csv"), &strings(&["map", "radius", "label"]), rows)?;
        }
        ReportBody::PrimeSensitivity { report } => {
            for t in &report.trials {
                write_json(&runs_dir.join(format!("trial_{:03}.json", t.trial)), t)?;
            }
            let rows = report.trials.iter().map(|t| {
                let primes: Vec<String> = t.primes.iter().map(u64::to_string).collect();
                vec![t.trial.to_string(), t.mse.to_string(), t.audit.label(), primes.join(" "), t.changed.to_string()]
            });
            write_matrix_csv(&plots_dir.join("sensitivity.csv"), &strings(&["trial", "mse", "label", "primes", "changed"]), rows)?;
        }
        ReportBody::Reconstruction { report, .. } => {
            write_reconstruction(dir, &[], report, outcome, "")?;
        }
        ReportBody::Highdim { screen, experiments } => {
            let rows = screen.outcomes.iter().map(|o| vec![o.cloud_id.to_string(), o.seed.to_string(), o.audit.label()]);
            write_matrix_csv(&plots_dir.join("screen.csv"), &strings(&["cloud_id", "seed", "label"]), rows)?;
            let names = experiments.first().map(|e| loss_names(&e.report)).unwrap_or_else(|| strings(&["mse", "total"]));
            let mut board = Vec::new();
            for e in experiments {
                let prefix = vec![e.cloud_id.to_string()];
                board.extend(leaderboard_rows(&prefix, &e.report, &names));
                write_reconstruction(dir, &prefix, &e.report, outcome, &format!("cloud_{:04}_", e.cloud_id))?;
            }
            let mut header = strings(&["cloud_id", "board", "rank", "run_id"]);
            header.extend(names.iter().cloned());
            header.extend(strings(&["output_torsion", "latent_torsion"]));
            write_matrix_csv(&dir.join("leaderboard.csv"), &header, board.into_iter())?;
        }
    }
    Ok(())
}

fn write_reconstruction(dir: &Path, prefix: &[String], report: &ReconstructionReport, outcome: &Outcome, stem: &str) -> Result<()> {
    let names = loss_names(report);
    let mut lead = if prefix.is_empty() { Vec::new() } else { strings(&["cloud_id"]) };
    let plots = dir.join("plots");
    if prefix.is_empty() {
        let mut header = lead.clone();
        header.extend(strings(&["board", "rank", "run_id"]));
        header.extend(names.iter().cloned());
        header.extend(strings(&["output_torsion", "latent_torsion"]));
        write_matrix_csv(&dir.join("leaderboard.csv"), &header, leaderboard_rows(prefix, report, &names).into_iter())?;
    }
    lead.push("run_id".into());
    let mut header = lead.clone();
    header.extend(names.iter().cloned());
    header.extend(strings(&["output_torsional", "latent_torsional", "output_label"]));
    write_matrix_csv(&plots.join(format!("{stem}loss_vs_run.csv")), &header, loss_vs_run_rows(prefix, report, &names).into_iter())?;
    let mut header = lead;
    header.extend(strings(&["epoch", "learning_rate"]));
    header.extend(names.iter().cloned());
    write_matrix_csv(&plots.join(format!("{stem}history.csv")), &header, history_rows(prefix, report, &names).into_iter())?;

    let input_key = if stem.is_empty() { "input" } else { stem.trim_end_matches('_') };
    let input = outcome.inputs.iter().find(|(k, _)| k == input_key).map(|(_, x)| x);
    let shown = scatter_runs(report);
    for r in &report.runs {
        let key = format!("{stem}run_{:03}", r.run_id);
        write_json(&dir.join("runs").join(format!("{key}.json")), r)?;
        if let Some((_, art)) = outcome.artifacts.iter().find(|(k, _)| *k == key) {
            let mut f = fs::File::create(dir.join(&r.checkpoint))?;
            f.write_all(art.model.to_json()?.as_bytes())?;
            if let (Some(input), true) = (input, shown.contains(&r.run_id)) {
                write_scatter(&plots.join(format!("scatter_{key}.csv")), input, art)?;
            }
        }
    }
    Ok(())
}
