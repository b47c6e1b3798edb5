//! Mini-batch training with weighted loss terms.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use torsionscope_core::rng::derived;
use torsionscope_core::{Error, PointCloud, Result};

use crate::network::{cloud_to_array, AutoencoderModel, Mode};
use crate::optim::Adam;

/// A differentiable loss on `(input, latent, output)` of a batch.
pub trait LossTerm: Send + Sync {
    fn name(&self) -> &str;

    fn weight(&self) -> f64;

    /// Whether the term takes part in epoch `epoch` (1-based).
    fn active_at(&self, _epoch: usize) -> bool {
        true
    }

    /// Terms that only make sense on batch-sized point sets are evaluated on
    /// the full data as the mean over consecutive batch-sized chunks.
    fn batch_local(&self) -> bool {
        false
    }

    fn compute(
        &self,
        input: &Array2<f64>,
        latent: &Array2<f64>,
        output: &Array2<f64>,
        with_grad: bool,
    ) -> Result<TermOutput>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermOutput {
    pub value: f64,
    pub grad_latent: Option<Array2<f64>>,
    pub grad_output: Option<Array2<f64>>,
}

/// Mean over samples and coordinates of the squared error.
pub fn mse_loss(output: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if output.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.len(), found: output.len() });
    }
    if output.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    let diff = output - target;
    Ok(diff.mapv(|d| d * d).sum() / output.len() as f64)
}

pub fn mse_grad(output: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    (output - target) * (2.0 / output.len() as f64)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MseTerm;

impl LossTerm for MseTerm {
    fn name(&self) -> &str {
        "mse"
    }

    fn weight(&self) -> f64 {
        1.0
    }

    fn compute(
        &self,
        input: &Array2<f64>,
        _latent: &Array2<f64>,
        output: &Array2<f64>,
        with_grad: bool,
    ) -> Result<TermOutput> {
        Ok(TermOutput {
            value: mse_loss(output, input)?,
            grad_latent: None,
            grad_output: with_grad.then(|| mse_grad(output, input)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrPhase {
    pub first_epoch: usize,
    pub last_epoch: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Overrides `learning_rate` on the listed epoch ranges (inclusive).
    #[serde(default)]
    pub lr_schedule: Vec<LrPhase>,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, learning_rate: f64, seed: u64) -> Self {
        TrainConfig { epochs, batch_size, learning_rate, weight_decay: 0.0, seed, lr_schedule: Vec::new() }
    }

    /// Ten reconstruction-only epochs at 1e-4, then 1e-2 through epoch 30,
    /// 1e-3 through epoch 50 and 1e-4 afterwards.
    pub fn with_rtd_schedule(mut self) -> Self {
        self.lr_schedule = vec![
            LrPhase { first_epoch: 1, last_epoch: 10, lr: 1e-4 },
            LrPhase { first_epoch: 11, last_epoch: 30, lr: 1e-2 },
            LrPhase { first_epoch: 31, last_epoch: 50, lr: 1e-3 },
            LrPhase { first_epoch: 51, last_epoch: usize::MAX, lr: 1e-4 },
        ];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let rates = std::iter::once(self.learning_rate).chain(self.lr_schedule.iter().map(|p| p.lr));
        if rates.chain(std::iter::once(self.weight_decay)).any(|v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("learning rates and weight decay must be finite and nonnegative".into()));
        }
        let mut prev_end = 0usize;
        for (k, p) in self.lr_schedule.iter().enumerate() {
            if p.first_epoch == 0 || p.first_epoch > p.last_epoch || (k > 0 && p.first_epoch <= prev_end) {
                return Err(Error::InvalidArgument("schedule ranges must be disjoint, ordered and 1-based".into()));
            }
            prev_end = p.last_epoch;
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .find(|p| (p.first_epoch..=p.last_epoch).contains(&epoch))
            .map_or(self.learning_rate, |p| p.lr)
    }
}

/// Unweighted value of one term; `None` while the term is inactive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub name: String,
    pub weight: f64,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub terms: Vec<TermValue>,
    pub total: f64,
}

impl LossValues {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).and_then(|t| t.value)
    }

    /// Weighted sum of the active terms, recomputed from the components.
    pub fn recomputed_total(&self) -> f64 {
        self.terms.iter().filter_map(|t| t.value.map(|v| t.weight * v)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub losses: LossValues,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn all_finite(&self) -> bool {
        self.epochs
            .iter()
            .all(|e| e.losses.total.is_finite() && e.losses.terms.iter().all(|t| t.value.is_none_or(f64::is_finite)))
    }
}

fn check_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    match a.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite(format!("{what} entry {k} is {}", a.as_slice().map_or(f64::NAN, |s| s[k])))),
        None => Ok(()),
    }
}

/// One optimizer step on `batch`. Returns the batch losses.
pub fn backward_and_step(
    model: &mut AutoencoderModel,
    optimizer: &mut Adam,
    batch: &Array2<f64>,
    terms: &[Box<dyn LossTerm>],
    epoch: usize,
    lr: f64,
) -> Result<LossValues> {
    let trace = model.forward(batch, Mode::Train)?;
    let mut grad_latent: Option<Array2<f64>> = None;
    let mut grad_output = Array2::<f64>::zeros(trace.output.raw_dim());
    let mut values = Vec::with_capacity(terms.len());
    let mut total = 0.0;
    for term in terms {
        let w = term.weight();
        if !term.active_at(epoch) || w == 0.0 {
            values.push(TermValue { name: term.name().to_string(), weight: w, value: None });
            continue;
        }
        let out = term.compute(batch, &trace.latent, &trace.output, true)?;
        if let Some(g) = out.grad_output {
            check_finite(&g, &format!("{} output gradient", term.name()))?;
            grad_output.scaled_add(w, &g);
        }
        if let Some(g) = out.grad_latent {
            check_finite(&g, &format!("{} latent gradient", term.name()))?;
            match &mut grad_latent {
                Some(acc) => acc.scaled_add(w, &g),
                None => grad_latent = Some(g * w),
            }
        }
        total += w * out.value;
        values.push(TermValue { name: term.name().to_string(), weight: w, value: Some(out.value) });
    }
    let grads = model.backward(&trace, grad_latent.as_ref(), &grad_output);
    if !grads.all_finite() {
        return Err(Error::NonFinite(format!("parameter gradient in epoch {epoch}")));
    }
    model.update_running_stats(&trace);
    optimizer.apply(model, &grads, lr);
    Ok(LossValues { terms: values, total })
}

/// Evaluation-mode losses on the full data set.
pub fn evaluate(
    model: &AutoencoderModel,
    data: &Array2<f64>,
    terms: &[Box<dyn LossTerm>],
    batch_size: usize,
    epoch: usize,
) -> Result<LossValues> {
    let (latent, output) = model.predict(data)?;
    let n = data.nrows();
    let chunk = batch_size.clamp(1, n);
    let mut values = Vec::with_capacity(terms.len());
    let mut total = 0.0;
    for term in terms {
        let w = term.weight();
        let value = if !term.active_at(epoch) {
            None
        } else if term.batch_local() && n > chunk {
            let mut sum = 0.0;
            let mut count = 0usize;
            for start in (0..n).step_by(chunk) {
                let end = (start + chunk).min(n);
                let s = ndarray::s![start..end, ..];
                sum += term.compute(&data.slice(s).to_owned(), &latent.slice(s).to_owned(), &output.slice(s).to_owned(), false)?.value;
                count += 1;
            }
            Some(sum / count as f64)
        } else {
            Some(term.compute(data, &latent, &output, false)?.value)
        };
        if let Some(v) = value {
            total += w * v;
        }
        values.push(TermValue { name: term.name().to_string(), weight: w, value });
    }
    Ok(LossValues { terms: values, total })
}

/// Shuffled mini-batches, batch-size chunks with a trailing singleton merged
/// into the previous batch so batch statistics stay defined.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = order.len() - 1 - out.last().expect("nonempty").len();
        *out.last_mut().expect("nonempty") = &order[start..];
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub optimizer: Adam,
}

/// Trains in place. Every epoch shuffles the data with the config seed, takes
/// one step per mini-batch, then evaluates on the full data set.
pub fn train(
    model: &mut AutoencoderModel,
    data: &PointCloud,
    config: &TrainConfig,
    terms: &[Box<dyn LossTerm>],
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), found: data.dim() });
    }
    let x = cloud_to_array(data);
    let mut optimizer = Adam::new(model.n_params(), config.weight_decay);
    let mut rng = derived(config.seed, 1);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = TrainHistory::default();
    for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        for idx in batches(&order, config.batch_size) {
            let batch = x.select(Axis(0), idx);
            backward_and_step(model, &mut optimizer, &batch, terms, epoch, lr)?;
        }
        let losses = evaluate(model, &x, terms, config.batch_size, epoch)?;
        if !losses.total.is_finite() {
            return Err(Error::NonFinite(format!("loss in epoch {epoch}")));
        }
        history.epochs.push(EpochRecord { epoch, learning_rate: lr, losses });
    }
    Ok(TrainOutcome { history, optimizer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mse_conventions() {
        assert_eq!(mse_loss(&array![[0.0]], &array![[1.0]]).unwrap(), 1.0);
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(mse_loss(&a, &Array2::zeros((2, 2))).unwrap(), 1.0);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert!(mse_loss(&a, &Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn schedule_lookup_and_validation() {
        let c = TrainConfig::new(100, 32, 1e-3, 0).with_rtd_schedule();
        c.validate().unwrap();
        assert_eq!(c.lr_at(1), 1e-4);
        assert_eq!(c.lr_at(11), 1e-2);
        assert_eq!(c.lr_at(50), 1e-3);
        assert_eq!(c.lr_at(100), 1e-4);
        let mut bad = c.clone();
        bad.lr_schedule.swap(0, 1);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn batching_merges_singletons() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order[..1], 4);
        assert_eq!(b.len(), 1);
    }
}
