//! Mini-batch optimizers: plain SGD, Adam, and NAdam (Nesterov-momentum
//! Adam with the `0.96^(t/250)` momentum schedule). Weight decay is coupled —
//! `wd · θ` is added to the raw gradient before the update rule runs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Nadam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "nadam" => Ok(OptimizerKind::Nadam),
            other => Err(Error::config(format!(
                "unknown optimizer {other:?} (expected sgd, adam, or nadam)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive and finite"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight decay must be non-negative and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// First/second moment accumulators for one parameter tensor.
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state for one retrain call. Every retrain constructs a fresh
/// instance, so moments never leak across calls.
pub struct Optimizer {
    spec: OptimizerSpec,
    slots: Vec<Slot>,
    t: u64,
    /// Running product of the NAdam momentum schedule μ_1 · … · μ_t.
    mu_product: f64,
}

impl Optimizer {
    pub fn new(spec: &OptimizerSpec) -> Self {
        Optimizer {
            spec: spec.clone(),
            slots: Vec::new(),
            t: 0,
            mu_product: 1.0,
        }
    }

    /// One update over every parameter tensor; call once per mini-batch.
    /// Tensor order must stay fixed across calls.
    pub fn step(&mut self, tensors: &mut [(&mut [f64], &[f64])]) {
        if self.slots.is_empty() {
            self.slots = tensors
                .iter()
                .map(|(p, _)| Slot {
                    m: vec![0.0; p.len()],
                    v: vec![0.0; p.len()],
                })
                .collect();
        }
        debug_assert_eq!(self.slots.len(), tensors.len());
        self.t += 1;
        let t = self.t as f64;
        let lr = self.spec.learning_rate;
        let wd = self.spec.weight_decay;
        match self.spec.kind {
            OptimizerKind::Sgd => {
                for (params, grads) in tensors.iter_mut() {
                    for (p, &g) in params.iter_mut().zip(*grads) {
                        *p -= lr * (g + wd * *p);
                    }
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powf(t);
                let c2 = 1.0 - BETA2.powf(t);
                for (slot, (params, grads)) in self.slots.iter_mut().zip(tensors.iter_mut()) {
                    for i in 0..params.len() {
                        let g = grads[i] + wd * params[i];
                        slot.m[i] = BETA1 * slot.m[i] + (1.0 - BETA1) * g;
                        slot.v[i] = BETA2 * slot.v[i] + (1.0 - BETA2) * g * g;
                        let m_hat = slot.m[i] / c1;
                        let v_hat = slot.v[i] / c2;
                        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                }
            }
            OptimizerKind::Nadam => {
                let mu_t = BETA1 * (1.0 - 0.5 * 0.96f64.powf(t / 250.0));
                let mu_next = BETA1 * (1.0 - 0.5 * 0.96f64.powf((t + 1.0) / 250.0));
                self.mu_product *= mu_t;
                let c2 = 1.0 - BETA2.powf(t);
                let g_scale = (1.0 - mu_t) / (1.0 - self.mu_product);
                let m_scale = mu_next / (1.0 - self.mu_product * mu_next);
                for (slot, (params, grads)) in self.slots.iter_mut().zip(tensors.iter_mut()) {
                    for i in 0..params.len() {
                        let g = grads[i] + wd * params[i];
                        slot.m[i] = BETA1 * slot.m[i] + (1.0 - BETA1) * g;
                        slot.v[i] = BETA2 * slot.v[i] + (1.0 - BETA2) * g * g;
                        let v_hat = slot.v[i] / c2;
                        params[i] -=
                            lr * (g_scale * g + m_scale * slot.m[i]) / (v_hat.sqrt() + EPS);
                    }
                }
            }
        }
    }
}
