//! Seeded random search over box-shaped hyperparameter spaces.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use torsionscope_core::rng::derived;
use torsionscope_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub scale: ParamScale,
}

impl ParamRange {
    pub fn log(name: &str, low: f64, high: f64) -> Self {
        ParamRange { name: name.into(), low, high, scale: ParamScale::Log }
    }

    pub fn linear(name: &str, low: f64, high: f64) -> Self {
        ParamRange { name: name.into(), low, high, scale: ParamScale::Linear }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.low.is_finite()
            && self.high.is_finite()
            && self.low <= self.high
            && (self.scale == ParamScale::Linear || self.low > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad range for {}: [{}, {}]", self.name, self.low, self.high)))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        let u: f64 = rng.random();
        match self.scale {
            ParamScale::Linear => self.low + u * (self.high - self.low),
            ParamScale::Log => (self.low.ln() + u * (self.high.ln() - self.low.ln())).exp(),
        }
    }
}

pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: String,
    pub best: Params,
    pub best_value: f64,
    pub trace: Vec<Trial>,
}

/// Evaluates `n_calls` independent draws and keeps the smallest objective.
/// Failed or non-finite evaluations are logged in the trace and skipped.
pub fn hyperparam_search<F>(space: &[ParamRange], n_calls: usize, seed: u64, mut objective: F) -> Result<SearchResult>
where
    F: FnMut(&Params) -> Result<f64>,
{
    if n_calls == 0 {
        return Err(Error::InvalidArgument("n_calls must be at least 1".into()));
    }
    for r in space {
        r.validate()?;
    }
    let mut rng = derived(seed, 7);
    let mut trace = Vec::with_capacity(n_calls);
    let mut best: Option<(f64, usize)> = None;
    for index in 0..n_calls {
        let params: Params = space.iter().map(|r| (r.name.clone(), r.sample(&mut rng))).collect();
        let (value, error) = match objective(&params) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(v) = value {
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, index));
            }
        }
        trace.push(Trial { index, params, value, error });
    }
    let (best_value, at) = best.ok_or_else(|| Error::InvalidArgument("every search trial failed".into()))?;
    Ok(SearchResult { method: "seeded random search".into(), best: trace[at].params.clone(), best_value, trace })
}
