use serde::{Deserialize, Serialize};

use crate::network::{AutoencoderModel, Gradients};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with L2 weight decay folded into the gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        Adam { weight_decay, step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn apply(&mut self, model: &mut AutoencoderModel, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let g = grads.flat();
        let mut k = 0;
        for slice in model.param_slices_mut() {
            for p in slice.iter_mut() {
                let gk = g[k] + self.weight_decay * *p;
                self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * gk;
                self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * gk * gk;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                k += 1;
            }
        }
    }
}
