//! Dense feedforward autoencoders with optional batch normalization.
//!
//! Each layer computes `z = x Wᵀ + b`, optionally normalizes `z` per feature,
//! and applies its activation. Batches are `n × d` arrays, one point per row.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use torsionscope_core::rng::seeded;
use torsionscope_core::{Activation, Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, batch_norm: bool) -> Self {
        LayerSpec { in_dim, out_dim, activation, batch_norm }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `out_dim × in_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn: Option<BatchNorm>,
}

impl Layer {
    /// Weights and biases uniform on `±1/sqrt(fan_in)`.
    pub fn init<R: Rng>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
        }
        let bound = 1.0 / (spec.in_dim as f64).sqrt();
        let weight = Array2::from_shape_fn((spec.out_dim, spec.in_dim), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(spec.out_dim, |_| rng.random_range(-bound..bound));
        Ok(Layer { spec, weight, bias, bn: spec.batch_norm.then(|| BatchNorm::new(spec.out_dim)) })
    }

    pub fn apply(&self, x: &Array2<f64>, mode: Mode) -> Array2<f64> {
        self.forward(x, mode).output
    }

    fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len() + self.bn.as_ref().map_or(0, |b| 2 * b.gamma.len())
    }

    fn forward(&self, x: &Array2<f64>, mode: Mode) -> LayerTrace {
        let z = x.dot(&self.weight.t()) + &self.bias;
        let (y, norm) = match &self.bn {
            None => (z.clone(), None),
            Some(bn) => {
                let (mean, var) = match mode {
                    Mode::Train => batch_moments(&z),
                    Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                };
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let xhat = (&z - &mean) * &inv_std;
                let y = &xhat * &bn.gamma + &bn.beta;
                (y, Some(NormTrace { xhat, inv_std, mean, var, mode }))
            }
        };
        let act = self.spec.activation;
        let out = y.mapv(|v| act.apply(v));
        LayerTrace { input: x.clone(), pre_activation: y, norm, output: out }
    }

    fn backward(&self, trace: &LayerTrace, d_out: &Array2<f64>) -> (LayerGrad, Array2<f64>) {
        let act = self.spec.activation;
        let d_y = d_out * &trace.pre_activation.mapv(|v| act.derivative(v));
        let (d_z, d_gamma, d_beta) = match (&self.bn, &trace.norm) {
            (Some(bn), Some(norm)) => {
                let d_gamma = (&d_y * &norm.xhat).sum_axis(Axis(0));
                let d_beta = d_y.sum_axis(Axis(0));
                let d_xhat = &d_y * &bn.gamma;
                let d_z = match norm.mode {
                    Mode::Eval => &d_xhat * &norm.inv_std,
                    Mode::Train => {
                        let n = d_y.nrows() as f64;
                        let sum = d_xhat.sum_axis(Axis(0));
                        let dot = (&d_xhat * &norm.xhat).sum_axis(Axis(0));
                        ((&d_xhat * n - &sum) - &norm.xhat * &dot) * &(&norm.inv_std / n)
                    }
                };
                (d_z, Some(d_gamma), Some(d_beta))
            }
            _ => (d_y, None, None),
        };
        let grad = LayerGrad {
            weight: d_z.t().dot(&trace.input),
            bias: d_z.sum_axis(Axis(0)),
            gamma: d_gamma,
            beta: d_beta,
        };
        (grad, d_z.dot(&self.weight))
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ];
        if let Some(bn) = &mut self.bn {
            out.push(bn.gamma.as_slice_mut().expect("standard layout"));
            out.push(bn.beta.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> =
            vec![self.weight.as_slice().expect("standard layout"), self.bias.as_slice().expect("standard layout")];
        if let Some(bn) = &self.bn {
            out.push(bn.gamma.as_slice().expect("standard layout"));
            out.push(bn.beta.as_slice().expect("standard layout"));
        }
        out
    }
}

/// Per-feature mean and biased variance over the rows.
fn batch_moments(z: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = z.nrows() as f64;
    let mean = z.sum_axis(Axis(0)) / n;
    let centered = z - &mean;
    let var = (&centered * &centered).sum_axis(Axis(0)) / n;
    (mean, var)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
struct NormTrace {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    mean: Array1<f64>,
    var: Array1<f64>,
    mode: Mode,
}

#[derive(Clone, Debug)]
pub struct LayerTrace {
    input: Array2<f64>,
    pre_activation: Array2<f64>,
    norm: Option<NormTrace>,
    output: Array2<f64>,
}

/// Everything a backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub latent: Array2<f64>,
    pub output: Array2<f64>,
    encoder: Vec<LayerTrace>,
    decoder: Vec<LayerTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

impl LayerGrad {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> =
            vec![self.weight.as_slice().expect("standard layout"), self.bias.as_slice().expect("standard layout")];
        out.extend(self.gamma.iter().map(|g| g.as_slice().expect("standard layout")));
        out.extend(self.beta.iter().map(|g| g.as_slice().expect("standard layout")));
        out
    }
}

/// Parameter gradients in the same order as [`AutoencoderModel::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.slices()).flatten().copied().collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().flat_map(|l| l.slices()).flatten().all(|g| g.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
    pub seed: u64,
}

impl AutoencoderModel {
    /// Builds a model from explicit layer specs with seeded initialization.
    pub fn new(encoder: &[LayerSpec], decoder: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let encoder = encoder.iter().map(|&s| Layer::init(s, &mut rng)).collect::<Result<Vec<_>>>()?;
        let decoder = decoder.iter().map(|&s| Layer::init(s, &mut rng)).collect::<Result<Vec<_>>>()?;
        let model = AutoencoderModel { encoder, decoder, seed };
        model.validate()?;
        Ok(model)
    }

    /// Builds `w0 → w1 → … → wk` where the narrowest interior width is the
    /// latent layer. Hidden layers use `hidden` and batch norm when
    /// requested; the latent and output layers are linear without batch norm.
    pub fn from_widths(widths: &[usize], hidden: Activation, batch_norm: bool, seed: u64) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidArgument("an autoencoder needs at least three widths".into()));
        }
        let last = widths.len() - 1;
        let latent_at = (1..last).min_by_key(|&i| (widths[i], i)).expect("interior is non-empty");
        let spec = |i: usize| {
            let plain = i + 1 == latent_at || i + 1 == last;
            let act = if plain { Activation::Linear } else { hidden };
            LayerSpec::new(widths[i], widths[i + 1], act, batch_norm && !plain)
        };
        let encoder: Vec<LayerSpec> = (0..latent_at).map(spec).collect();
        let decoder: Vec<LayerSpec> = (latent_at..last).map(spec).collect();
        Self::new(&encoder, &decoder, seed)
    }

    fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::InvalidArgument("encoder and decoder need at least one layer".into()));
        }
        for pair in self.layers().collect::<Vec<_>>().windows(2) {
            if pair[0].spec.out_dim != pair[1].spec.in_dim {
                return Err(Error::DimensionMismatch { expected: pair[0].spec.out_dim, found: pair[1].spec.in_dim });
            }
        }
        let (input, latent, output) = (self.input_dim(), self.latent_dim(), self.output_dim());
        if output != input {
            return Err(Error::DimensionMismatch { expected: input, found: output });
        }
        if latent >= input {
            return Err(Error::InvalidArgument(format!("latent dim {latent} must be below input dim {input}")));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].spec.in_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.decoder.last().expect("validated").spec.out_dim
    }

    /// Widths along the network, input first.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers().map(|l| l.spec.out_dim)).collect()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(Layer::n_params).sum()
    }

    /// Weights, biases, then batch-norm scale and shift, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers().flat_map(|l| l.param_slices()).flatten().copied().collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: values.len() });
        }
        let mut at = 0;
        for slice in self.param_slices_mut() {
            slice.copy_from_slice(&values[at..at + slice.len()]);
            at += slice.len();
        }
        Ok(())
    }

    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).flat_map(Layer::param_slices_mut).collect()
    }

    pub fn forward(&self, batch: &Array2<f64>, mode: Mode) -> Result<ForwardTrace> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: batch.ncols() });
        }
        if batch.nrows() == 0 {
            return Err(Error::Empty("batch"));
        }
        let run = |layers: &[Layer], x: &Array2<f64>| {
            let mut traces: Vec<LayerTrace> = Vec::with_capacity(layers.len());
            for layer in layers {
                let trace = layer.forward(traces.last().map_or(x, |t| &t.output), mode);
                traces.push(trace);
            }
            traces
        };
        let encoder = run(&self.encoder, batch);
        let latent = encoder.last().expect("validated").output.clone();
        let decoder = run(&self.decoder, &latent);
        let output = decoder.last().expect("validated").output.clone();
        Ok(ForwardTrace { latent, output, encoder, decoder })
    }

    /// `(latent, output)` in evaluation mode.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let t = self.forward(batch, Mode::Eval)?;
        Ok((t.latent, t.output))
    }

    /// Decodes latent points in evaluation mode.
    pub fn decode(&self, latent: &Array2<f64>) -> Result<Array2<f64>> {
        if latent.ncols() != self.latent_dim() {
            return Err(Error::DimensionMismatch { expected: self.latent_dim(), found: latent.ncols() });
        }
        let mut x = latent.clone();
        for layer in &self.decoder {
            x = layer.forward(&x, Mode::Eval).output;
        }
        Ok(x)
    }

    /// Backpropagates loss gradients given with respect to the output and,
    /// optionally, the latent codes.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_latent: Option<&Array2<f64>>,
        grad_output: &Array2<f64>,
    ) -> Gradients {
        let mut dec_grads = Vec::with_capacity(self.decoder.len());
        let mut d = grad_output.clone();
        for (layer, t) in self.decoder.iter().zip(&trace.decoder).rev() {
            let (g, dx) = layer.backward(t, &d);
            dec_grads.push(g);
            d = dx;
        }
        if let Some(gl) = grad_latent {
            d += gl;
        }
        let mut enc_grads = Vec::with_capacity(self.encoder.len());
        for (layer, t) in self.encoder.iter().zip(&trace.encoder).rev() {
            let (g, dx) = layer.backward(t, &d);
            enc_grads.push(g);
            d = dx;
        }
        enc_grads.reverse();
        dec_grads.reverse();
        enc_grads.extend(dec_grads);
        Gradients { layers: enc_grads }
    }

    /// Folds training-mode batch statistics into the running averages.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace) {
        let traces = trace.encoder.iter().chain(&trace.decoder);
        let layers = self.encoder.iter_mut().chain(self.decoder.iter_mut());
        for (layer, t) in layers.zip(traces) {
            if let (Some(bn), Some(norm)) = (&mut layer.bn, &t.norm) {
                if norm.mode != Mode::Train {
                    continue;
                }
                let n = t.input.nrows() as f64;
                let unbiased = if n > 1.0 { &norm.var * (n / (n - 1.0)) } else { norm.var.clone() };
                bn.running_mean = &bn.running_mean * (1.0 - BN_MOMENTUM) + &norm.mean * BN_MOMENTUM;
                bn.running_var = &bn.running_var * (1.0 - BN_MOMENTUM) + unbiased * BN_MOMENTUM;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: AutoencoderModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}

/// Row-per-point array view of a cloud.
pub fn cloud_to_array(cloud: &torsionscope_core::PointCloud) -> Array2<f64> {
    Array2::from_shape_vec((cloud.len(), cloud.dim()), cloud.as_flat().to_vec()).expect("consistent shape")
}

pub fn array_to_cloud(a: &Array2<f64>) -> Result<torsionscope_core::PointCloud> {
    torsionscope_core::PointCloud::from_flat(a.ncols(), a.iter().copied().collect())
}
