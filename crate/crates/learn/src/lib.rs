//! Autoencoders trained from scratch, with topology-aware loss terms.

pub mod network;
pub mod optim;
pub mod rtd;
pub mod topo;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use torsionscope_core::{Error, Result};

pub use network::{array_to_cloud, cloud_to_array, AutoencoderModel, LayerSpec, Mode};
pub use optim::Adam;
pub use rtd::{rtd_from_weights, rtd_loss, rtd_loss_grad, RtdGraphs, RtdTerm};
pub use topo::{topo_loss, topo_loss_grad, EdgeSelection, TopoTerm};
pub use train::{backward_and_step, mse_loss, train, LossTerm, MseTerm, TrainConfig, TrainHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Topo,
    Rtd,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Topo => "topo",
            LossKind::Rtd => "rtd",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" | "vanilla" => Ok(LossKind::Mse),
            "topo" | "topoae" => Ok(LossKind::Topo),
            "rtd" => Ok(LossKind::Rtd),
            other => Err(Error::Parse(format!("unknown loss {other:?}"))),
        }
    }
}

/// Reconstruction loss plus `weight` times the topological term of `kind`.
pub fn combined_loss(kind: LossKind, weight: f64) -> Result<Vec<Box<dyn LossTerm>>> {
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::InvalidArgument(format!("loss weight {weight} must be finite and nonnegative")));
    }
    let mut terms: Vec<Box<dyn LossTerm>> = vec![Box::new(MseTerm)];
    match kind {
        LossKind::Mse => {}
        LossKind::Topo => terms.push(Box::new(TopoTerm { weight })),
        LossKind::Rtd => terms.push(Box::new(RtdTerm::new(weight))),
    }
    Ok(terms)
}
