//! Named experiment presets and the manifests that pin them down.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use torsionscope_core::pointcloud::LoopBand;
use torsionscope_core::rips::DEFAULT_SIMPLEX_CAP;
use torsionscope_core::{Activation, PointCloud};
use torsionscope_learn::{LossKind, TrainConfig};

use crate::error::Result;
use crate::reconstruction::{ModelSpec, ReconstructionConfig, ScreenConfig};
use crate::scan::TorsionScan;
use crate::search::ParamRange;
use crate::studies::{FragilityConfig, SensitivityConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fragility,
    PrimeSensitivity,
    LoopsVanilla,
    LoopsTopo,
    LoopsRtd,
    #[value(name = "highdim-10")]
    #[serde(rename = "highdim-10")]
    Highdim10,
    #[value(name = "highdim-13")]
    #[serde(rename = "highdim-13")]
    Highdim13,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fragility,
        Preset::PrimeSensitivity,
        Preset::LoopsVanilla,
        Preset::LoopsTopo,
        Preset::LoopsRtd,
        Preset::Highdim10,
        Preset::Highdim13,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fragility => "fragility",
            Preset::PrimeSensitivity => "prime-sensitivity",
            Preset::LoopsVanilla => "loops-vanilla",
            Preset::LoopsTopo => "loops-topo",
            Preset::LoopsRtd => "loops-rtd",
            Preset::Highdim10 => "highdim-10",
            Preset::Highdim13 => "highdim-13",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Small run counts and epochs.
    Ci,
    Full,
}

/// Where the input cloud comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSpec {
    LoopBand(LoopBand),
    /// A point cloud in CSV or JSON format.
    File { path: PathBuf },
}

impl DataSpec {
    pub fn load(&self) -> Result<PointCloud> {
        match self {
            DataSpec::LoopBand(band) => Ok(band.generate()?),
            DataSpec::File { path } => read_cloud(path),
        }
    }
}

/// Reads a cloud as JSON when the extension is `.json`, else as CSV.
pub fn read_cloud(path: &std::path::Path) -> Result<PointCloud> {
    let reader = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_reader(reader)?)
    } else {
        Ok(PointCloud::read_csv(reader)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub name: String,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub range: ParamRange,
    pub n_calls: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresetConfig {
    Fragility {
        data: DataSpec,
        study: FragilityConfig,
        sweep_data: DataSpec,
        activations: Vec<Activation>,
        sweep_scan: TorsionScan,
        linear_maps: Vec<LinearMap>,
        linear_scan: TorsionScan,
    },
    PrimeSensitivity {
        data: DataSpec,
        study: SensitivityConfig,
    },
    Reconstruction {
        data: DataSpec,
        experiment: ReconstructionConfig,
        search: Option<SearchSpec>,
    },
    Highdim {
        screen: ScreenConfig,
        /// Template applied to each torsional cloud; its output scan is
        /// replaced by the screen scan pinned to that cloud.
        experiment: ReconstructionConfig,
        max_experiments: usize,
    },
}

/// Everything needed to rerun a preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub preset: Preset,
    pub profile: Profile,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub config: PresetConfig,
}

impl Manifest {
    pub fn load(path: &std::path::Path) -> Result<Manifest> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

pub const SEARCH_NOTE: &str =
    "hyperparameter search is seeded random search over the stated ranges with the stated call budget, \
     in place of Gaussian-process Bayesian optimization";

const TORSION_PRIMES: [u64; 3] = [2, 3, 5];
const SCAN_CAP: usize = 400_000;
const LOOP_POINTS: usize = 600;
const DATA_SEED: u64 = 7;

fn versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION").to_string();
    ["torsionscope", "torsionscope-core", "torsionscope-learn"].iter().map(|k| (k.to_string(), v.clone())).collect()
}

fn pick<T>(profile: Profile, ci: T, full: T) -> T {
    match profile {
        Profile::Ci => ci,
        Profile::Full => full,
    }
}

fn band_scan(cap: usize) -> TorsionScan {
    TorsionScan::absolute(0.3, 2, &TORSION_PRIMES, cap)
}

fn loops_config(loss: LossKind, profile: Profile, seed: u64) -> ReconstructionConfig {
    let mut train = TrainConfig::new(pick(profile, 20, 100), 32, 1e-3, seed);
    if loss == LossKind::Rtd {
        train = train.with_rtd_schedule();
    }
    ReconstructionConfig {
        model: ModelSpec { widths: vec![3, 32, 32, 2, 32, 32, 3], activation: Activation::Relu, batch_norm: true },
        loss,
        weight: if loss == LossKind::Mse { 0.0 } else { 1.0 },
        train,
        n_runs: pick(profile, 5, 40),
        seed,
        output_scan: band_scan(SCAN_CAP),
        latent_scan: TorsionScan::relative(0.15, 2, &TORSION_PRIMES, SCAN_CAP),
        leaderboard_size: 3,
    }
}

fn highdim_config(dim: usize, profile: Profile, seed: u64) -> (ScreenConfig, ReconstructionConfig) {
    let scan = TorsionScan::relative(0.9, 3, &TORSION_PRIMES, 200_000);
    let screen = ScreenConfig { n_clouds: pick(profile, 10, 1000), n_points: 40, dim, seed, scan: scan.clone() };
    let (hidden, lr, weight_decay, batch) = match dim {
        10 => ((128, 64), 0.001366, 2.43e-5, 32),
        _ => ((64, 32), 0.00042818, 1.21e-5, 128),
    };
    let mut train = TrainConfig::new(pick(profile, 10, 50), batch, lr, seed);
    train.weight_decay = weight_decay;
    let experiment = ReconstructionConfig {
        model: ModelSpec {
            widths: vec![dim, hidden.0, hidden.1, 8, hidden.1, hidden.0, dim],
            activation: Activation::Relu,
            batch_norm: true,
        },
        loss: LossKind::Mse,
        weight: 0.0,
        train,
        n_runs: pick(profile, 2, 10),
        seed,
        output_scan: scan.clone(),
        latent_scan: scan,
        leaderboard_size: 3,
    };
    (screen, experiment)
}

pub fn manifest(preset: Preset, profile: Profile, seed: u64) -> Manifest {
    let triple = DataSpec::LoopBand(LoopBand::triple(LOOP_POINTS, DATA_SEED));
    let double = DataSpec::LoopBand(LoopBand::double(LOOP_POINTS, DATA_SEED));
    let mut notes = Vec::new();
    let config = match preset {
        Preset::Fragility => PresetConfig::Fragility {
            data: triple,
            study: FragilityConfig {
                sigma: 0.15,
                max_rounds: pick(profile, 10, 100),
                seed,
                scan: band_scan(DEFAULT_SIMPLEX_CAP),
            },
            sweep_data: double,
            activations: Activation::NONLINEAR.to_vec(),
            sweep_scan: TorsionScan::relative(0.15, 2, &TORSION_PRIMES, SCAN_CAP),
            linear_maps: vec![
                LinearMap {
                    name: "squeeze".into(),
                    matrix: vec![vec![0.05, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]],
                },
                LinearMap { name: "project".into(), matrix: vec![vec![1.0, 0.0, 0.0]] },
            ],
            linear_scan: band_scan(DEFAULT_SIMPLEX_CAP),
        },
        Preset::PrimeSensitivity => PresetConfig::PrimeSensitivity {
            data: triple,
            study: SensitivityConfig { sigma: 0.02, trials: pick(profile, 3, 25), seed, scan: band_scan(DEFAULT_SIMPLEX_CAP) },
        },
        Preset::LoopsVanilla | Preset::LoopsTopo | Preset::LoopsRtd => {
            let (loss, search) = match preset {
                Preset::LoopsVanilla => (LossKind::Mse, None),
                Preset::LoopsTopo => (LossKind::Topo, Some(ParamRange::log("eta", 0.1, 3.0))),
                _ => (LossKind::Rtd, Some(ParamRange::log("chi", 1e-6, 1e3))),
            };
            if search.is_some() {
                notes.push(SEARCH_NOTE.to_string());
            }
            PresetConfig::Reconstruction {
                data: double,
                experiment: loops_config(loss, profile, seed),
                search: search.map(|range| SearchSpec { range, n_calls: pick(profile, 2, 20) }),
            }
        }
        Preset::Highdim10 | Preset::Highdim13 => {
            let dim = if preset == Preset::Highdim10 { 10 } else { 13 };
            let (screen, experiment) = highdim_config(dim, profile, seed);
            PresetConfig::Highdim { screen, experiment, max_experiments: pick(profile, 1, 5) }
        }
    };
    Manifest { preset, profile, seed, versions: versions(), notes, config }
}
