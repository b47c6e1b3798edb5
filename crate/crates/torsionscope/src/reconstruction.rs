//! Repeated autoencoder trainings with a torsion audit of every model.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use torsionscope_core::pointcloud::generate_random_cloud;
use torsionscope_core::rng::derived;
use torsionscope_core::{Activation, Coefficients, PersistenceDiagram, PointCloud};
use torsionscope_learn::train::{evaluate, LossValues};
use torsionscope_learn::{array_to_cloud, cloud_to_array, combined_loss, train, AutoencoderModel, LossKind, TrainConfig, TrainHistory};

use crate::error::{ExperimentError, Result};
use crate::scan::{Audit, TorsionScan};
use crate::search::{hyperparam_search, ParamRange, SearchResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> torsionscope_core::Result<AutoencoderModel> {
        AutoencoderModel::from_widths(&self.widths, self.activation, self.batch_norm, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub model: ModelSpec,
    pub loss: LossKind,
    pub weight: f64,
    pub train: TrainConfig,
    pub n_runs: usize,
    /// Run `k` initializes and shuffles with `seed + k`.
    pub seed: u64,
    pub output_scan: TorsionScan,
    pub latent_scan: TorsionScan,
    pub leaderboard_size: usize,
}

impl ReconstructionConfig {
    pub fn run_seed(&self, run_id: usize) -> u64 {
        self.seed.wrapping_add(run_id as u64)
    }

    fn terms(&self) -> torsionscope_core::Result<Vec<Box<dyn torsionscope_learn::LossTerm>>> {
        combined_loss(self.loss, self.weight)
    }
}

/// Second detector pass with the prime list reversed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub primes: Vec<u64>,
    pub label: String,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub weight: f64,
    pub train: TrainConfig,
    pub history: TrainHistory,
    pub final_losses: LossValues,
    pub output_torsion: Audit,
    pub confirmation: Option<Confirmation>,
    pub latent_torsion: Audit,
    /// Whether input and latent diagrams over the input's torsion prime
    /// differ; only computed for torsional inputs.
    pub latent_differs_mod_q: Option<bool>,
    pub checkpoint: String,
}

impl RunRecord {
    pub fn loss(&self, name: &str) -> Option<f64> {
        if name == "total" {
            Some(self.final_losses.total)
        } else {
            self.final_losses.get(name)
        }
    }
}

/// A trained model with its reconstruction, kept for checkpoints and plots.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub model: AutoencoderModel,
    pub latent: Array2<f64>,
    pub output: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub run_id: usize,
    pub losses: BTreeMap<String, Option<f64>>,
    pub output_torsion: String,
    pub latent_torsion: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub input_torsion: Audit,
    pub runs: Vec<RunRecord>,
    /// Lowest runs per loss name, plus `torsional_mse` restricted to
    /// torsional outputs.
    pub leaderboards: BTreeMap<String, Vec<LeaderboardRow>>,
    pub torsional_runs: Vec<usize>,
    pub latent_torsional_runs: Vec<usize>,
    pub skipped_audits: Vec<usize>,
    pub summary: BTreeMap<String, LossSummary>,
}

pub const TORSIONAL_BOARD: &str = "torsional_mse";

pub fn checkpoint_name(run_id: usize) -> String {
    format!("runs/run_{run_id:03}.model.json")
}

fn run_one(
    cloud: &PointCloud,
    config: &ReconstructionConfig,
    run_id: usize,
    input_mod_q: Option<&(u64, PersistenceDiagram)>,
) -> torsionscope_core::Result<(RunRecord, RunArtifacts)> {
    let seed = config.run_seed(run_id);
    let mut model = config.model.build(seed)?;
    let train_config = TrainConfig { seed, ..config.train.clone() };
    let terms = config.terms()?;
    let outcome = train(&mut model, cloud, &train_config, &terms)?;
    let x = cloud_to_array(cloud);
    let final_losses = match outcome.history.last() {
        Some(last) => last.losses.clone(),
        None => evaluate(&model, &x, &terms, train_config.batch_size, 0)?,
    };
    let (latent, output) = model.predict(&x)?;
    let output_cloud = array_to_cloud(&output)?;
    let latent_cloud = array_to_cloud(&latent)?;

    let output_torsion = config.output_scan.audit(&output_cloud)?;
    let confirmation = match output_torsion.report() {
        Some(r) if r.has_torsion => {
            let mut primes = config.output_scan.primes.clone();
            primes.reverse();
            let again = TorsionScan { primes: primes.clone(), ..config.output_scan.clone() }.check(&output_cloud)?;
            let (mut a, mut b) = (r.primes(), again.primes());
            a.sort_unstable();
            b.sort_unstable();
            Some(Confirmation { primes, label: again.label(), agrees: a == b })
        }
        _ => None,
    };
    let latent_torsion = config.latent_scan.audit(&latent_cloud)?;
    let latent_differs_mod_q = match input_mod_q {
        Some((q, input)) => match config.latent_scan.diagram(&latent_cloud, Coefficients::Prime(*q)) {
            Ok(latent_dgm) => Some(!input.same_intervals(&latent_dgm)),
            Err(torsionscope_core::Error::SimplexCapExceeded { .. }) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let record = RunRecord {
        run_id,
        seed,
        loss: config.loss,
        weight: config.weight,
        train: train_config,
        history: outcome.history,
        final_losses,
        output_torsion,
        confirmation,
        latent_torsion,
        latent_differs_mod_q,
        checkpoint: checkpoint_name(run_id),
    };
    Ok((record, RunArtifacts { model, latent, output }))
}

/// Trains `n_runs` seeded models on `cloud` and audits each output and latent cloud.
pub fn reconstruction_experiment(
    cloud: &PointCloud,
    config: &ReconstructionConfig,
) -> Result<(ReconstructionReport, Vec<RunArtifacts>)> {
    config.train.validate()?;
    let input_scan = config.output_scan.pinned_to(cloud);
    let input_torsion = input_scan.audit(cloud)?;
    let input_mod_q = match input_torsion.report().and_then(|r| r.first()) {
        Some(f) => Some((f.prime, input_scan.diagram(cloud, Coefficients::Prime(f.prime))?)),
        None => None,
    };
    let mut runs = Vec::with_capacity(config.n_runs);
    let mut artifacts = Vec::with_capacity(config.n_runs);
    for run_id in 0..config.n_runs {
        let (record, art) = run_one(cloud, config, run_id, input_mod_q.as_ref())
            .map_err(|source| ExperimentError::Run { run_id, source })?;
        runs.push(record);
        artifacts.push(art);
    }
    let report = assemble(input_torsion, runs, config.leaderboard_size);
    Ok((report, artifacts))
}

fn row(rank: usize, run: &RunRecord) -> LeaderboardRow {
    let mut losses: BTreeMap<String, Option<f64>> =
        run.final_losses.terms.iter().map(|t| (t.name.clone(), t.value)).collect();
    losses.insert("total".into(), Some(run.final_losses.total));
    LeaderboardRow {
        rank,
        run_id: run.run_id,
        losses,
        output_torsion: run.output_torsion.label(),
        latent_torsion: run.latent_torsion.label(),
    }
}

/// Runs ordered by a loss, missing values last, ties by run id.
pub fn ranked<'a>(runs: &'a [RunRecord], name: &str) -> Vec<&'a RunRecord> {
    let mut sorted: Vec<&RunRecord> = runs.iter().collect();
    sorted.sort_by(|a, b| {
        let key = |r: &RunRecord| r.loss(name).unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(a.run_id.cmp(&b.run_id))
    });
    sorted
}

fn summarize(values: &[f64]) -> LossSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    LossSummary {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
    }
}

pub fn assemble(input_torsion: Audit, runs: Vec<RunRecord>, k: usize) -> ReconstructionReport {
    let mut names: Vec<String> = runs
        .first()
        .map(|r| r.final_losses.terms.iter().map(|t| t.name.clone()).collect())
        .unwrap_or_default();
    names.push("total".into());

    let mut leaderboards = BTreeMap::new();
    let mut summary = BTreeMap::new();
    for name in &names {
        let board = ranked(&runs, name).into_iter().take(k).enumerate().map(|(i, r)| row(i + 1, r)).collect();
        leaderboards.insert(name.clone(), board);
        let values: Vec<f64> = runs.iter().filter_map(|r| r.loss(name)).collect();
        if !values.is_empty() {
            summary.insert(name.clone(), summarize(&values));
        }
    }
    let torsional: Vec<&RunRecord> =
        ranked(&runs, "mse").into_iter().filter(|r| r.output_torsion.is_torsional()).take(k).collect();
    leaderboards.insert(TORSIONAL_BOARD.into(), torsional.into_iter().enumerate().map(|(i, r)| row(i + 1, r)).collect());

    let pick = |f: &dyn Fn(&RunRecord) -> bool| runs.iter().filter(|r| f(r)).map(|r| r.run_id).collect::<Vec<_>>();
    ReconstructionReport {
        input_torsion,
        torsional_runs: pick(&|r| r.output_torsion.is_torsional()),
        latent_torsional_runs: pick(&|r| r.latent_torsion.is_torsional()),
        skipped_audits: pick(&|r| r.output_torsion.report().is_none() || r.latent_torsion.report().is_none()),
        leaderboards,
        summary,
        runs,
    }
}

/// Tunes the loss weight by random search. Each call trains a fresh model and
/// scores the total loss on one fixed training batch.
pub fn tune_weight(cloud: &PointCloud, config: &ReconstructionConfig, range: ParamRange, n_calls: usize) -> Result<SearchResult> {
    let x = cloud_to_array(cloud);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.shuffle(&mut derived(config.seed, 3));
    order.truncate(config.train.batch_size.min(x.nrows()));
    let batch = x.select(Axis(0), &order);
    let name = range.name.clone();
    let seed = config.seed;
    let result = hyperparam_search(&[range], n_calls, seed, |params| {
        let trial = ReconstructionConfig { weight: params[&name], ..config.clone() };
        let mut model = trial.model.build(seed)?;
        let terms = trial.terms()?;
        let train_config = TrainConfig { seed, ..trial.train.clone() };
        train(&mut model, cloud, &train_config, &terms)?;
        Ok(evaluate(&model, &batch, &terms, batch.nrows(), train_config.epochs)?.total)
    })?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub n_clouds: usize,
    pub n_points: usize,
    pub dim: usize,
    /// Cloud `k` is generated with `seed + k`.
    pub seed: u64,
    pub scan: TorsionScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenOutcome {
    pub cloud_id: usize,
    pub seed: u64,
    pub audit: Audit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub outcomes: Vec<ScreenOutcome>,
    pub torsional: Vec<usize>,
    pub skipped: Vec<usize>,
}

/// Audits uniformly random clouds; clouds over the simplex cap are skipped.
pub fn highdim_screen(config: &ScreenConfig) -> Result<ScreenReport> {
    let mut outcomes = Vec::with_capacity(config.n_clouds);
    for cloud_id in 0..config.n_clouds {
        let seed = config.seed.wrapping_add(cloud_id as u64);
        let cloud = generate_random_cloud(config.n_points, config.dim, seed)?;
        outcomes.push(ScreenOutcome { cloud_id, seed, audit: config.scan.audit(&cloud)? });
    }
    let torsional = outcomes.iter().filter(|o| o.audit.is_torsional()).map(|o| o.cloud_id).collect();
    let skipped = outcomes.iter().filter(|o| o.audit.report().is_none()).map(|o| o.cloud_id).collect();
    Ok(ScreenReport { outcomes, torsional, skipped })
}
