use nalgebra::DMatrix;
use ndarray::{s, Array2};
use rand::Rng;
use torsionscope_core::pointcloud::LoopBand;
use torsionscope_core::rng::seeded;
use torsionscope_core::{Activation, PointCloud};
use torsionscope_learn::network::LayerSpec;
use torsionscope_learn::train::{evaluate, MseTerm};
use torsionscope_learn::{
    backward_and_step, cloud_to_array, combined_loss, train, Adam, AutoencoderModel, LossKind, LossTerm, Mode,
    TrainConfig,
};

fn small_band() -> PointCloud {
    LoopBand::double(120, 7).generate().unwrap()
}

fn loop_model(seed: u64) -> AutoencoderModel {
    AutoencoderModel::from_widths(&[3, 32, 32, 2, 32, 32, 3], Activation::Relu, true, seed).unwrap()
}

#[test]
fn zero_epochs_leave_model_untouched() {
    let mut m = loop_model(1);
    let before = m.clone();
    let out = train(&mut m, &small_band(), &TrainConfig::new(0, 32, 1e-3, 0), &combined_loss(LossKind::Mse, 0.0).unwrap())
        .unwrap();
    assert!(out.history.epochs.is_empty());
    assert_eq!(m, before);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut m = loop_model(2);
    let before = m.parameters();
    let x = cloud_to_array(&small_band());
    let mut adam = Adam::new(m.n_params(), 0.0);
    let terms: Vec<Box<dyn LossTerm>> = vec![Box::new(MseTerm)];
    backward_and_step(&mut m, &mut adam, &x.slice(s![0..32, ..]).to_owned(), &terms, 1, 0.0).unwrap();
    assert_eq!(m.parameters(), before);
}

#[test]
fn identical_seeds_identical_trajectories() {
    let cfg = TrainConfig::new(3, 32, 1e-3, 11);
    let run = || {
        let mut m = loop_model(3);
        let h = train(&mut m, &small_band(), &cfg, &combined_loss(LossKind::Topo, 0.5).unwrap()).unwrap();
        (m, h.history)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.parameters(), b.parameters());
    assert_eq!(ha, hb);
    assert!(ha.all_finite());
}

#[test]
fn zero_weight_matches_vanilla_bitwise() {
    let data = small_band();
    let cfg = TrainConfig::new(3, 32, 1e-3, 4);
    let mut vanilla = loop_model(4);
    train(&mut vanilla, &data, &cfg, &combined_loss(LossKind::Mse, 1.0).unwrap()).unwrap();
    let mut topo = loop_model(4);
    train(&mut topo, &data, &cfg, &combined_loss(LossKind::Topo, 0.0).unwrap()).unwrap();
    assert_eq!(vanilla.parameters(), topo.parameters());

    let cfg = TrainConfig::new(12, 32, 1e-3, 4).with_rtd_schedule();
    let mut vanilla = loop_model(5);
    train(&mut vanilla, &data, &cfg, &combined_loss(LossKind::Mse, 1.0).unwrap()).unwrap();
    let mut rtd = loop_model(5);
    train(&mut rtd, &data, &cfg, &combined_loss(LossKind::Rtd, 0.0).unwrap()).unwrap();
    assert_eq!(vanilla.parameters(), rtd.parameters());
}

#[test]
fn history_totals_are_weighted_sums() {
    let data = small_band();
    let cfg = TrainConfig::new(12, 32, 1e-3, 6).with_rtd_schedule();
    let mut m = loop_model(6);
    let out = train(&mut m, &data, &cfg, &combined_loss(LossKind::Rtd, 0.01).unwrap()).unwrap();
    for e in &out.history.epochs {
        assert!((e.losses.total - e.losses.recomputed_total()).abs() <= 1e-9);
        assert_eq!(e.losses.get("rtd").is_some(), e.epoch > 10);
        assert_eq!(e.learning_rate, cfg.lr_at(e.epoch));
    }
    assert!(out.history.all_finite());
}

#[test]
fn eval_outputs_do_not_depend_on_batch_composition() {
    let mut m = loop_model(7);
    let data = small_band();
    train(&mut m, &data, &TrainConfig::new(1, 16, 1e-3, 7), &combined_loss(LossKind::Mse, 1.0).unwrap()).unwrap();
    let x = cloud_to_array(&data);
    let (_, full) = m.predict(&x).unwrap();
    let (_, part) = m.predict(&x.slice(s![40..45, ..]).to_owned()).unwrap();
    assert_eq!(part, full.slice(s![40..45, ..]));
    let (_, single) = m.predict(&x.slice(s![3..4, ..]).to_owned()).unwrap();
    assert_eq!(single, full.slice(s![3..4, ..]));
}

#[test]
fn trained_models_keep_architecture() {
    let mut m = loop_model(8);
    train(&mut m, &small_band(), &TrainConfig::new(1, 32, 1e-3, 8), &combined_loss(LossKind::Mse, 1.0).unwrap()).unwrap();
    assert_eq!(m.widths(), vec![3, 32, 32, 2, 32, 32, 3]);
    assert!(m.latent_dim() < m.input_dim());
    assert_eq!(m.output_dim(), m.input_dim());
}

#[test]
fn non_finite_gradients_abort() {
    let mut m = loop_model(9);
    let mut x = cloud_to_array(&small_band()).slice(s![0..8, ..]).to_owned();
    x[[0, 0]] = f64::NAN;
    let terms: Vec<Box<dyn LossTerm>> = vec![Box::new(MseTerm)];
    let mut adam = Adam::new(m.n_params(), 0.0);
    let err = backward_and_step(&mut m, &mut adam, &x, &terms, 1, 1e-3).unwrap_err();
    assert!(err.to_string().contains("non-finite"));
}

fn linear_decoder_model(seed: u64) -> AutoencoderModel {
    let enc = [LayerSpec::new(3, 8, Activation::Relu, true), LayerSpec::new(8, 2, Activation::Linear, false)];
    let dec = [
        LayerSpec::new(2, 16, Activation::Linear, true),
        LayerSpec::new(16, 16, Activation::Linear, true),
        LayerSpec::new(16, 3, Activation::Linear, false),
    ];
    let mut m = AutoencoderModel::new(&enc, &dec, seed).unwrap();
    let mut rng = seeded(seed + 1);
    for layer in &mut m.decoder {
        if let Some(bn) = &mut layer.bn {
            bn.running_mean.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            bn.running_var.mapv_inplace(|_| rng.random_range(0.5..2.0));
            bn.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
        }
    }
    m
}

#[test]
fn linear_decoder_outputs_span_a_plane() {
    for seed in [1u64, 2, 3] {
        let m = linear_decoder_model(seed);
        let side = 41;
        let grid = Array2::from_shape_fn((side * side, 2), |(i, k)| {
            let t = if k == 0 { i / side } else { i % side };
            -3.0 + 6.0 * t as f64 / (side - 1) as f64
        });
        let out = m.decode(&grid).unwrap();
        let mean = out.mean_axis(ndarray::Axis(0)).unwrap();
        let centered = &out - &mean;
        let mat = DMatrix::from_row_iterator(centered.nrows(), 3, centered.iter().copied());
        let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[2] <= 1e-8 * sv[0], "seed {seed}: {sv:?}");
    }
}

#[test]
fn evaluation_uses_full_data() {
    let data = small_band();
    let m = loop_model(10);
    let x = cloud_to_array(&data);
    let terms = combined_loss(LossKind::Mse, 1.0).unwrap();
    let v = evaluate(&m, &x, &terms, 32, 1).unwrap();
    let (_, out) = m.forward(&x, Mode::Eval).map(|t| (t.latent, t.output)).unwrap();
    assert_eq!(v.get("mse").unwrap(), torsionscope_learn::mse_loss(&out, &x).unwrap());
}
