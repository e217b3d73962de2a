//! The retrain procedure: mini-batch cross-entropy descent over the labeled
//! pool with validation-loss early stopping, returning test accuracy.

use super::{Classifier, Optimizer, OptimizerSpec};
use crate::data::{Dataset, PoolState};
use crate::error::{Error, Result};
use crate::seeding::{sample_without_replacement, Stream};
use ndarray::Axis;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Restore the classifier's stored initial parameters before training.
    FromScratch,
    /// Continue from the incoming parameters.
    FineTune,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Consecutive epochs without a validation-loss improvement before
    /// training stops.
    pub patience: usize,
    pub mode: TrainMode,
    pub min_epochs: usize,
}

impl TrainConfig {
    pub fn fine_tune() -> Self {
        TrainConfig {
            max_epochs: 50,
            patience: 2,
            mode: TrainMode::FineTune,
            min_epochs: 1,
        }
    }

    pub fn from_scratch() -> Self {
        TrainConfig {
            max_epochs: 500,
            patience: 10,
            mode: TrainMode::FromScratch,
            min_epochs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if self.min_epochs == 0 {
            return Err(Error::config("min_epochs must be at least 1"));
        }
        if self.max_epochs < self.min_epochs {
            return Err(Error::config("max_epochs must be at least min_epochs"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    /// Accuracy on the dataset's test partition after training.
    pub test_accuracy: f64,
    pub epochs_run: usize,
    pub final_val_loss: f64,
}

/// Trains `model` on the labeled pool. Batch order draws from the data
/// stream (a fresh permutation per epoch), dropout masks from the theta
/// stream. Optimizer moments start from zero on every call. After each
/// epoch the validation loss (dropout off) is measured; training stops once
/// it has failed to improve for `patience` consecutive epochs — but never
/// before `min_epochs` — or when `max_epochs` is reached. The parameters are
/// whatever the last epoch produced; there is no rollback to the best epoch.
pub fn retrain(
    model: &mut Classifier,
    pool: &PoolState,
    cfg: &TrainConfig,
    opt_spec: &OptimizerSpec,
    data: &Dataset,
    rng_data: &mut Stream,
    rng_theta: &mut Stream,
) -> Result<RetrainOutcome> {
    cfg.validate()?;
    opt_spec.validate()?;
    if pool.labeled.is_empty() {
        return Err(Error::insufficient("retrain needs a nonempty labeled set"));
    }
    if pool.val_idx.is_empty() {
        return Err(Error::insufficient("retrain needs a nonempty validation set"));
    }
    if cfg.mode == TrainMode::FromScratch {
        model.reset_to_init();
    }
    let mut opt = Optimizer::new(opt_spec);

    let positions: Vec<usize> = (0..pool.labeled.len()).collect();
    let val_x = data.x.select(Axis(0), &pool.val_idx);
    let val_y: Vec<usize> = pool.val_idx.iter().map(|&i| data.y[i]).collect();

    let mut best_val = f64::INFINITY;
    let mut bad_epochs = 0;
    let mut epochs_run = 0;
    let mut final_val_loss = f64::INFINITY;
    for epoch in 1..=cfg.max_epochs {
        let order = sample_without_replacement(&positions, positions.len(), rng_data);
        for chunk in order.chunks(opt_spec.batch_size) {
            let idx: Vec<usize> = chunk.iter().map(|&p| pool.labeled[p].0).collect();
            let ys: Vec<usize> = chunk.iter().map(|&p| pool.labeled[p].1).collect();
            let x = data.x.select(Axis(0), &idx);
            let cache = model.forward_cached(x.view(), true, Some(rng_theta))?;
            let loss = Classifier::batch_loss(&cache, &ys);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "non-finite training loss".into(),
                });
            }
            let grads = model.backward(&cache, &ys);
            let mut tensors: Vec<(&mut [f64], &[f64])> = Vec::new();
            for (layer, grad) in model.layers_mut().iter_mut().zip(&grads) {
                tensors.push((
                    layer.w.as_slice_mut().expect("standard layout"),
                    grad.w.as_slice().expect("standard layout"),
                ));
                tensors.push((
                    layer.b.as_slice_mut().expect("standard layout"),
                    grad.b.as_slice().expect("standard layout"),
                ));
            }
            opt.step(&mut tensors);
        }
        let val_cache = model.forward_cached(val_x.view(), false, None)?;
        let val_loss = Classifier::batch_loss(&val_cache, &val_y);
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: "non-finite validation loss".into(),
            });
        }
        epochs_run = epoch;
        final_val_loss = val_loss;
        if val_loss < best_val {
            best_val = val_loss;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
        }
        if bad_epochs >= cfg.patience && epoch >= cfg.min_epochs {
            break;
        }
    }
    let test_accuracy = model.accuracy(&data.test_idx, data)?;
    Ok(RetrainOutcome {
        test_accuracy,
        epochs_run,
        final_val_loss,
    })
}
