//! Analytic network gradients against central finite differences.

use ndarray::Array2;
use rand::Rng;
use torsionscope_core::rng::seeded;
use torsionscope_core::Activation;
use torsionscope_learn::network::{Layer, LayerSpec};
use torsionscope_learn::train::{mse_grad, mse_loss};
use torsionscope_learn::{AutoencoderModel, Mode};

const STEP: f64 = 1e-6;

fn random_array(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// MSE against `target` plus a fixed linear functional of the latent codes,
/// so that both gradient entry points are exercised.
fn objective(model: &AutoencoderModel, x: &Array2<f64>, target: &Array2<f64>, probe: &Array2<f64>, mode: Mode) -> f64 {
    let t = model.forward(x, mode).unwrap();
    mse_loss(&t.output, target).unwrap() + (&t.latent * probe).sum()
}

/// Largest coordinate error relative to the larger of the two magnitudes,
/// floored at a small fraction of the gradient scale.
fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3 * scale).max(1e-12))
        .fold(0.0, f64::max)
}

fn check_model(model: &AutoencoderModel, mode: Mode, seed: u64) -> f64 {
    let x = random_array(10, model.input_dim(), seed);
    let target = random_array(10, model.input_dim(), seed + 1);
    let probe = random_array(10, model.latent_dim(), seed + 2) * 0.1;

    let trace = model.forward(&x, mode).unwrap();
    let analytic = model.backward(&trace, Some(&probe), &mse_grad(&trace.output, &target)).flat();

    let base = model.parameters();
    let mut numeric = Vec::with_capacity(base.len());
    let mut probe_model = model.clone();
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + STEP;
        probe_model.set_parameters(&p).unwrap();
        let up = objective(&probe_model, &x, &target, &probe, mode);
        p[k] = base[k] - STEP;
        probe_model.set_parameters(&p).unwrap();
        let down = objective(&probe_model, &x, &target, &probe, mode);
        numeric.push((up - down) / (2.0 * STEP));
    }
    max_relative_error(&analytic, &numeric)
}

#[test]
fn all_activations_with_and_without_batch_norm() {
    let mut seed = 100;
    let activations = Activation::NONLINEAR.iter().copied().chain([Activation::Linear]);
    for act in activations {
        for bn in [false, true] {
            let model = AutoencoderModel::from_widths(&[3, 5, 4, 2, 4, 5, 3], act, bn, seed).unwrap();
            let err = check_model(&model, Mode::Train, seed);
            assert!(err <= 1e-5, "{act} bn={bn}: relative error {err:e}");
            seed += 10;
        }
    }
}

#[test]
fn small_model_three_two_three() {
    let model = AutoencoderModel::from_widths(&[3, 2, 3], Activation::Linear, false, 5).unwrap();
    assert!(check_model(&model, Mode::Train, 5) <= 1e-5);
}

#[test]
fn eval_mode_batch_norm_gradients() {
    let mut model = AutoencoderModel::from_widths(&[4, 6, 2, 6, 4], Activation::Tanh, true, 8).unwrap();
    let x = random_array(30, 4, 77);
    let t = model.forward(&x, Mode::Train).unwrap();
    model.update_running_stats(&t);
    assert!(check_model(&model, Mode::Eval, 9) <= 1e-5);
}

#[test]
fn identity_layer_passes_input_through() {
    let spec = LayerSpec::new(3, 3, Activation::Linear, false);
    let mut layer = Layer::init(spec, &mut seeded(0)).unwrap();
    layer.weight = Array2::eye(3);
    layer.bias.fill(0.0);
    let x = random_array(7, 3, 1);
    assert_eq!(layer.apply(&x, Mode::Eval), x);
}
