use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use torsionscope::presets::{self, read_cloud, DataSpec, Manifest, Preset, PresetConfig, Profile};
use torsionscope::report::{run_manifest, write_outputs};
use torsionscope::scan::truncated_intervals;
use torsionscope_core::metrics::{bottleneck, bottleneck_intervals, persistence_entropy, wasserstein1, wasserstein1_intervals, BarLengthSet};
use torsionscope_core::pointcloud::{generate_projective_plane, generate_random_cloud, perturb_gaussian, LoopBand};
use torsionscope_core::{
    build_rips, reduce, torsion_check, Activation, Coefficients, MaxRadius, PersistenceDiagram, PointCloud, RipsOptions,
    Selection,
};
use torsionscope_learn::{combined_loss, train, AutoencoderModel, LossKind, TrainConfig};

#[derive(Parser)]
#[command(name = "torsionscope", version, about = "Torsion in persistent homology of point clouds and autoencoder outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Band,
    Rp2,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Bottleneck,
    Wasserstein,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic point cloud.
    Generate {
        #[arg(long, value_enum)]
        shape: Shape,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of points; defaults to 600 for bands, 200 for rp2 and 40 for random clouds.
        #[arg(long)]
        n: Option<usize>,
        /// Ambient dimension of a random cloud.
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Times a band winds around its core circle.
        #[arg(long, default_value_t = 2)]
        windings: usize,
    },
    /// Add Gaussian noise to some or all points.
    Perturb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// Comma-separated point indices; all points when omitted.
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Persistence diagram of the Rips filtration.
    Ph {
        #[arg(long = "in")]
        input: PathBuf,
        /// Highest homology dimension.
        #[arg(long, default_value_t = 1)]
        maxdim: usize,
        #[arg(long, default_value = "q2")]
        coeff: Coefficients,
        /// Rips scale cap; the enclosing radius when omitted.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the filtration, one `birth dim v0 v1 ...` line per simplex.
        #[arg(long)]
        dump_filtration: Option<PathBuf>,
    },
    /// Compare rational and mod-q pairings to detect torsion.
    TorsionCheck {
        #[arg(long = "in")]
        input: PathBuf,
        /// Highest homology dimension.
        #[arg(long, default_value_t = 1)]
        maxdim: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
        primes: Vec<u64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between two diagrams in one dimension.
    DgmDist {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, value_enum, default_value = "bottleneck")]
        metric: Metric,
        /// Cut essential classes off at this radius instead of requiring equal counts.
        #[arg(long)]
        truncate: Option<f64>,
    },
    /// Persistence entropy of the finite bars in one dimension.
    Entropy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Train an autoencoder and save a checkpoint.
    Train {
        /// Training cloud; the double band when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "3,32,32,2,32,32,3")]
        arch: Vec<usize>,
        #[arg(long, default_value = "mse")]
        loss: LossKind,
        /// Weight of the topological term.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.0)]
        weight_decay: f64,
        #[arg(long, default_value = "relu")]
        activation: Activation,
        #[arg(long)]
        no_batch_norm: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch losses as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run a preset, or rerun a saved manifest.
    Experiment {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        preset: Option<Preset>,
        #[arg(long, value_enum, default_value = "ci")]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// A `manifest.json` from an earlier run; overrides preset, profile and seed.
        #[arg(long, conflicts_with = "preset")]
        manifest: Option<PathBuf>,
        /// Replace the preset's input cloud with a CSV or JSON file.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<PointCloud> {
    read_cloud(path).with_context(|| format!("reading {}", path.display()))
}

fn save(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::to_writer(&mut w, cloud)?;
    } else {
        cloud.write_csv(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_diagram(path: &Path) -> Result<PersistenceDiagram> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn rips_options(maxdim: usize, radius: Option<f64>) -> RipsOptions {
    RipsOptions::new(maxdim + 1, radius.map_or(MaxRadius::Auto, MaxRadius::Finite))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Generate { shape, out: path, seed, n, dim, windings } => {
            let cloud = match shape {
                Shape::Band => {
                    let n = n.unwrap_or(600);
                    match windings {
                        2 => LoopBand::double(n, seed),
                        3 => LoopBand::triple(n, seed),
                        w => LoopBand { windings: w, ..LoopBand::double(n, seed) },
                    }
                    .generate()?
                }
                Shape::Rp2 => generate_projective_plane(n.unwrap_or(200), seed)?,
                Shape::Random => generate_random_cloud(n.unwrap_or(40), dim, seed)?,
            };
            save(&cloud, &path)?;
        }
        Command::Perturb { input, out: path, sigma, indices, seed } => {
            let selection = indices.map_or(Selection::All, Selection::Indices);
            let (moved, record) = perturb_gaussian(&load(&input)?, &selection, sigma, seed)?;
            save(&moved, &path)?;
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
        Command::Ph { input, maxdim, coeff, radius, out: path, dump_filtration } => {
            let filtration = build_rips(&load(&input)?, &rips_options(maxdim, radius))?;
            if let Some(dump) = dump_filtration {
                let mut w = BufWriter::new(fs::File::create(&dump)?);
                filtration.dump(&mut w)?;
                w.flush()?;
            }
            write_json(&path, &reduce(&filtration, coeff, maxdim)?)?;
        }
        Command::TorsionCheck { input, maxdim, primes, radius, out: path } => {
            let filtration = build_rips(&load(&input)?, &rips_options(maxdim, radius))?;
            let report = torsion_check(&filtration, &primes, maxdim)?;
            writeln!(out, "{}", report.label())?;
            if let Some(path) = path {
                write_json(&path, &report)?;
            }
        }
        Command::DgmDist { a, b, dim, metric, truncate } => {
            let (a, b) = (read_diagram(&a)?, read_diagram(&b)?);
            let d = match truncate {
                Some(r) => {
                    let (x, y) = (truncated_intervals(&a, dim, r), truncated_intervals(&b, dim, r));
                    match metric {
                        Metric::Bottleneck => bottleneck_intervals(&x, &y),
                        Metric::Wasserstein => wasserstein1_intervals(&x, &y),
                    }
                }
                None => match metric {
                    Metric::Bottleneck => bottleneck(&a, &b, dim)?,
                    Metric::Wasserstein => wasserstein1(&a, &b, dim)?,
                },
            };
            writeln!(out, "{d}")?;
        }
        Command::Entropy { input, dim } => {
            let bars = BarLengthSet::from_diagram(&read_diagram(&input)?, dim);
            writeln!(out, "{}", persistence_entropy(&bars)?)?;
        }
        Command::Train {
            input,
            arch,
            loss,
            weight,
            epochs,
            batch_size,
            lr,
            weight_decay,
            activation,
            no_batch_norm,
            seed,
            out: path,
            history,
        } => {
            let cloud = match input {
                Some(p) => load(&p)?,
                None => LoopBand::double(600, 7).generate()?,
            };
            let mut config = TrainConfig::new(epochs, batch_size, lr, seed);
            config.weight_decay = weight_decay;
            if loss == LossKind::Rtd {
                config = config.with_rtd_schedule();
            }
            let terms = combined_loss(loss, if loss == LossKind::Mse { 0.0 } else { weight })?;
            let mut model = AutoencoderModel::from_widths(&arch, activation, !no_batch_norm, seed)?;
            let outcome = train(&mut model, &cloud, &config, &terms)?;
            fs::write(&path, model.to_json()?)?;
            if let Some(h) = history {
                write_json(&h, &outcome.history)?;
            }
            if let Some(last) = outcome.history.last() {
                writeln!(out, "epoch {} total {}", last.epoch, last.losses.total)?;
            }
        }
        Command::Experiment { preset, profile, seed, manifest, data, out: dir } => {
            let mut manifest = match (manifest, preset) {
                (Some(path), _) => Manifest::load(&path)?,
                (None, Some(preset)) => presets::manifest(preset, profile, seed),
                (None, None) => bail!("either --preset or --manifest is required"),
            };
            if let Some(path) = data {
                let spec = DataSpec::File { path };
                match &mut manifest.config {
                    PresetConfig::Fragility { data, .. }
                    | PresetConfig::PrimeSensitivity { data, .. }
                    | PresetConfig::Reconstruction { data, .. } => *data = spec,
                    PresetConfig::Highdim { .. } => bail!("high-dimensional presets generate their own clouds"),
                }
            }
            let outcome = run_manifest(&manifest)?;
            write_outputs(&dir, &outcome)?;
            writeln!(out, "{} ({:?}) written to {}", manifest.preset.name(), manifest.profile, dir.display())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
