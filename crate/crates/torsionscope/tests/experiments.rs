use std::collections::BTreeMap;

use proptest::prelude::*;
use torsionscope::presets::{manifest, Manifest, Preset, Profile};
use torsionscope::reconstruction::{
    assemble, ranked, reconstruction_experiment, tune_weight, ModelSpec, ReconstructionConfig, RunRecord,
    TORSIONAL_BOARD,
};
use torsionscope::scan::{Audit, TorsionScan};
use torsionscope::search::{hyperparam_search, ParamRange};
use torsionscope::studies::{fragility_study, prime_sensitivity_study, FragilityConfig, SensitivityConfig};
use torsionscope_core::pointcloud::{generate_projective_plane, LoopBand};
use torsionscope_core::{Activation, Error, TorsionReport};
use torsionscope_learn::train::{LossValues, TermValue};
use torsionscope_learn::{cloud_to_array, LossKind, TrainConfig, TrainHistory};

fn small_config(loss: LossKind, epochs: usize, n_runs: usize) -> ReconstructionConfig {
    ReconstructionConfig {
        model: ModelSpec { widths: vec![3, 8, 2, 8, 3], activation: Activation::Relu, batch_norm: true },
        loss,
        weight: 0.5,
        train: TrainConfig::new(epochs, 32, 1e-3, 0),
        n_runs,
        seed: 3,
        output_scan: TorsionScan::absolute(0.3, 2, &[2, 3], 200_000),
        latent_scan: TorsionScan::relative(0.15, 2, &[2, 3], 200_000),
        leaderboard_size: 3,
    }
}

fn band(n: usize) -> torsionscope_core::PointCloud {
    LoopBand::double(n, 7).generate().unwrap()
}

#[test]
fn single_point_space_returns_that_point() {
    let space = [ParamRange::log("eta", 0.7, 0.7)];
    let result = hyperparam_search(&space, 5, 1, |p| Ok((p["eta"] - 1.0).powi(2))).unwrap();
    assert_eq!(result.best["eta"], 0.7);
    assert!(result.trace.iter().all(|t| t.params["eta"] == 0.7));
}

#[test]
fn search_trace_has_every_call_and_best_is_minimal() {
    let space = [ParamRange::log("eta", 0.1, 3.0)];
    let result = hyperparam_search(&space, 20, 9, |p| Ok((p["eta"].ln() - 0.2).abs())).unwrap();
    assert_eq!(result.trace.len(), 20);
    for t in &result.trace {
        let eta = t.params["eta"];
        assert!((0.1..=3.0).contains(&eta));
        assert!(result.best_value <= t.value.unwrap());
    }
    let wide = hyperparam_search(&[ParamRange::log("chi", 1e-6, 1e3)], 20, 9, |p| Ok(p["chi"])).unwrap();
    let decades: std::collections::BTreeSet<i32> = wide.trace.iter().map(|t| t.params["chi"].log10().floor() as i32).collect();
    assert!(decades.len() >= 5, "log-uniform draws should spread over decades: {decades:?}");
}

#[test]
fn failed_trials_are_logged_and_skipped() {
    let mut k = 0;
    let result = hyperparam_search(&[ParamRange::linear("x", 0.0, 1.0)], 6, 2, |p| {
        k += 1;
        match k % 3 {
            0 => Err(Error::InvalidArgument("diverged".into())),
            1 => Ok(f64::NAN),
            _ => Ok(p["x"]),
        }
    })
    .unwrap();
    assert_eq!(result.trace.iter().filter(|t| t.value.is_some()).count(), 2);
    assert!(result.trace.iter().filter(|t| t.value.is_none()).all(|t| t.error.is_some()));
    assert!(hyperparam_search(&[ParamRange::linear("x", 0.0, 1.0)], 0, 2, |_| Ok(0.0)).is_err());
    assert!(hyperparam_search(&[ParamRange::linear("x", 0.0, 1.0)], 3, 2, |_| Ok(f64::INFINITY)).is_err());
    assert!(hyperparam_search(&[ParamRange::log("x", 0.0, 1.0)], 3, 2, |_| Ok(0.0)).is_err());
}

#[test]
fn search_is_seeded() {
    let space = [ParamRange::log("eta", 0.1, 3.0), ParamRange::linear("b", -1.0, 1.0)];
    let f = |p: &BTreeMap<String, f64>| Ok(p["eta"] * p["b"]);
    assert_eq!(hyperparam_search(&space, 7, 4, f).unwrap(), hyperparam_search(&space, 7, 4, f).unwrap());
    assert_ne!(hyperparam_search(&space, 7, 4, f).unwrap(), hyperparam_search(&space, 7, 5, f).unwrap());
}

#[test]
fn untrained_single_run_is_deterministic() {
    let cloud = band(120);
    let config = small_config(LossKind::Mse, 0, 1);
    let (a, arts) = reconstruction_experiment(&cloud, &config).unwrap();
    let (b, _) = reconstruction_experiment(&cloud, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.runs.len(), 1);
    assert!(a.runs[0].history.epochs.is_empty());
    let model = config.model.build(config.run_seed(0)).unwrap();
    assert_eq!(arts[0].model, model);
    let (_, out) = model.predict(&cloud_to_array(&cloud)).unwrap();
    assert_eq!(a.runs[0].loss("mse").unwrap(), torsionscope_learn::mse_loss(&out, &cloud_to_array(&cloud)).unwrap());
    assert_eq!(a.leaderboards["mse"].len(), 1);
}

#[test]
fn run_records_are_consistent() {
    let cloud = band(120);
    let config = small_config(LossKind::Topo, 2, 3);
    let (report, arts) = reconstruction_experiment(&cloud, &config).unwrap();
    assert_eq!(arts.len(), 3);
    for (k, run) in report.runs.iter().enumerate() {
        assert_eq!(run.run_id, k);
        assert_eq!(run.seed, config.seed + k as u64);
        assert_eq!(run.history.epochs.len(), 2);
        for e in &run.history.epochs {
            assert!((e.losses.total - e.losses.recomputed_total()).abs() <= 1e-9);
        }
        assert!(run.final_losses.get("topo").is_some());
        assert!(matches!(run.latent_torsion, Audit::Checked { .. } | Audit::Skipped { .. }));
        if run.output_torsion.is_torsional() {
            assert!(run.confirmation.as_ref().unwrap().agrees);
        }
    }
    let names: Vec<&String> = report.leaderboards.keys().collect();
    assert_eq!(names, vec!["mse", "topo", TORSIONAL_BOARD, "total"]);
}

#[test]
fn input_audit_and_latent_comparison_on_torsional_input() {
    let cloud = band(600);
    let mut config = small_config(LossKind::Mse, 0, 1);
    config.output_scan = TorsionScan::absolute(0.3, 2, &[2, 3], 5_000_000);
    let (report, _) = reconstruction_experiment(&cloud, &config).unwrap();
    assert_eq!(report.input_torsion.label(), "Torsion: (2, 32610)");
    assert!(report.runs[0].latent_differs_mod_q.is_some());
}

fn record(run_id: usize, mse: f64, topo: Option<f64>, torsional: bool) -> RunRecord {
    let report = TorsionReport {
        has_torsion: torsional,
        findings: if torsional {
            vec![torsionscope_core::TorsionFinding { prime: 2, first_index: 10 + run_id, hom_dim: 1 }]
        } else {
            Vec::new()
        },
        primes_tested: vec![2, 3],
        method: torsionscope_core::torsion::TorsionMethod::PrimeComparison,
    };
    let terms = vec![
        TermValue { name: "mse".into(), weight: 1.0, value: Some(mse) },
        TermValue { name: "topo".into(), weight: 0.5, value: topo },
    ];
    let total = mse + 0.5 * topo.unwrap_or(0.0);
    RunRecord {
        run_id,
        seed: run_id as u64,
        loss: LossKind::Topo,
        weight: 0.5,
        train: TrainConfig::new(0, 32, 1e-3, 0),
        history: TrainHistory::default(),
        final_losses: LossValues { terms, total },
        output_torsion: Audit::checked(report),
        confirmation: None,
        latent_torsion: Audit::Skipped { reason: "test".into() },
        latent_differs_mod_q: None,
        checkpoint: String::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaderboards_are_prefixes_of_the_full_sort(
        runs in prop::collection::vec((0.0f64..1.0, prop::option::of(0.0f64..1.0), any::<bool>()), 1..12),
        k in 1usize..15,
    ) {
        let records: Vec<RunRecord> = runs.iter().enumerate().map(|(i, &(m, t, f))| record(i, m, t, f)).collect();
        let report = assemble(Audit::Skipped { reason: "test".into() }, records.clone(), k);
        for name in ["mse", "topo", "total"] {
            let mut full: Vec<(f64, usize)> =
                records.iter().map(|r| (r.loss(name).unwrap_or(f64::INFINITY), r.run_id)).collect();
            full.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let board: Vec<usize> = report.leaderboards[name].iter().map(|r| r.run_id).collect();
            let expected: Vec<usize> = full.iter().take(k).map(|p| p.1).collect();
            prop_assert_eq!(&board, &expected);
            prop_assert!(report.leaderboards[name].iter().enumerate().all(|(i, r)| r.rank == i + 1));
            if k >= records.len() {
                let mut sorted = board.clone();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, (0..records.len()).collect::<Vec<_>>());
            }
        }
        let flagged: Vec<usize> = records.iter().filter(|r| r.output_torsion.is_torsional()).map(|r| r.run_id).collect();
        prop_assert_eq!(&report.torsional_runs, &flagged);
        let torsional_board: Vec<usize> = report.leaderboards[TORSIONAL_BOARD].iter().map(|r| r.run_id).collect();
        let expected: Vec<usize> =
            ranked(&records, "mse").into_iter().filter(|r| r.output_torsion.is_torsional()).take(k).map(|r| r.run_id).collect();
        prop_assert_eq!(torsional_board, expected);
        prop_assert_eq!(report.skipped_audits.len(), records.len());
    }
}

#[test]
fn weight_tuning_records_every_call() {
    let cloud = band(120);
    let config = small_config(LossKind::Topo, 1, 1);
    let result = tune_weight(&cloud, &config, ParamRange::log("eta", 0.1, 3.0), 3).unwrap();
    assert_eq!(result.trace.len(), 3);
    assert!(result.trace.iter().all(|t| t.value.is_some_and(|v| v >= result.best_value)));
    assert_eq!(result, tune_weight(&cloud, &config, ParamRange::log("eta", 0.1, 3.0), 3).unwrap());
}

#[test]
fn fragility_rejects_clean_input() {
    let clean = LoopBand { windings: 1, n_points: 200, major_radius: 1.0, band_width: 0.2, twist: 0, seed: 3, jitter: false }
        .generate()
        .unwrap();
    let config = FragilityConfig { sigma: 0.1, max_rounds: 3, seed: 0, scan: TorsionScan::absolute(0.3, 2, &[2, 3], 1_000_000) };
    assert!(matches!(fragility_study(&clean, &config), Err(Error::NotTorsional(_))));
}

#[test]
fn fragility_trace_on_projective_plane_sample() {
    let cloud = generate_projective_plane(200, 2).unwrap();
    let config = FragilityConfig { sigma: 0.3, max_rounds: 4, seed: 1, scan: TorsionScan::absolute(0.6, 2, &[2, 3], 1_000_000) };
    let trace = fragility_study(&cloud, &config).unwrap();
    assert!(!trace.rounds.is_empty() && trace.rounds.len() <= 4);
    assert!(trace.rounds.windows(2).all(|w| w[0].shifted_total <= w[1].shifted_total));
    assert_eq!(trace.torsion_free, trace.final_label == "No Torsion");
    if !trace.torsion_free {
        assert_eq!(trace.rounds.len(), 4);
    }
    assert_eq!(trace, fragility_study(&cloud, &config).unwrap());
}

#[test]
fn zero_noise_keeps_the_verdict() {
    let cloud = generate_projective_plane(200, 2).unwrap();
    let config = SensitivityConfig { sigma: 0.0, trials: 3, seed: 5, scan: TorsionScan::absolute(0.6, 2, &[2, 3], 1_000_000) };
    let report = prime_sensitivity_study(&cloud, &config).unwrap();
    assert_eq!(report.original_primes, vec![2]);
    assert!(report.changed_trials.is_empty());
    assert!(report.trials.iter().all(|t| t.audit.label() == report.original_label && t.mse == 0.0));
}

#[test]
fn manifests_round_trip() {
    for preset in Preset::ALL {
        for profile in [Profile::Ci, Profile::Full] {
            let m = manifest(preset, profile, 11);
            let text = serde_json::to_string_pretty(&m).unwrap();
            let back: Manifest = serde_json::from_str(&text).unwrap();
            assert_eq!(back, m);
            assert!(text.contains(preset.name()));
            let searched = matches!(preset, Preset::LoopsTopo | Preset::LoopsRtd);
            assert_eq!(m.notes.iter().any(|n| n.contains("random search")), searched);
        }
    }
}

#[test]
fn highdim_presets_use_tuned_hyperparameters() {
    use torsionscope::presets::PresetConfig;
    for (preset, widths, lr, wd, batch) in [
        (Preset::Highdim10, vec![10, 128, 64, 8, 64, 128, 10], 0.001366, 2.43e-5, 32),
        (Preset::Highdim13, vec![13, 64, 32, 8, 32, 64, 13], 0.00042818, 1.21e-5, 128),
    ] {
        let PresetConfig::Highdim { experiment, screen, .. } = manifest(preset, Profile::Full, 0).config else {
            panic!("not a highdim config");
        };
        assert_eq!(experiment.model.widths, widths);
        assert_eq!((experiment.train.learning_rate, experiment.train.weight_decay, experiment.train.batch_size), (lr, wd, batch));
        assert_eq!((screen.n_clouds, screen.scan.max_dim), (1000, 3));
    }
}

#[test]
fn highdim_template_trains_on_a_random_cloud() {
    use torsionscope::presets::PresetConfig;
    let PresetConfig::Highdim { mut experiment, screen, .. } = manifest(Preset::Highdim10, Profile::Ci, 0).config else {
        panic!("not a highdim config");
    };
    experiment.n_runs = 1;
    experiment.train.epochs = 2;
    let cloud = torsionscope_core::pointcloud::generate_random_cloud(40, 10, 123).unwrap();
    experiment.output_scan = screen.scan.pinned_to(&cloud);
    let (report, arts) = reconstruction_experiment(&cloud, &experiment).unwrap();
    assert_eq!(arts[0].latent.ncols(), 8);
    assert!(report.runs[0].latent_torsion.report().is_some());
    assert!(report.runs[0].final_losses.total.is_finite());
}
