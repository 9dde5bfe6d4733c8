use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamState, DropoutCtx, Example, FusionModel, ModelError};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub dropout_rate: f64,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    /// Stop after the first epoch whose selection MSE is at or below this.
    #[serde(default)]
    pub target_mse: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            clip_norm: 1.0,
            dropout_rate: 0.1,
            max_steps: None,
            target_mse: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be finite and >= 0", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be positive when set".into());
        }
        if self.target_mse.is_some_and(|t| t.is_nan() || t < 0.0) {
            return bad("target_mse must be >= 0 when set".into());
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad(format!("clip_norm {} must be positive", self.clip_norm));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode batch loss over the epoch.
    pub train_mse: f64,
    pub val_mse: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: FusionModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub steps: usize,
}

/// Mean squared error of raw predictions with dropout off.
pub fn evaluate_mse(model: &FusionModel, data: &[Example]) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut sum = 0.0;
    for ex in data {
        let e = model.predict(&ex.enc, &ex.descriptors)? - ex.target;
        sum += e * e;
    }
    Ok(sum / data.len() as f64)
}

fn keep_best(
    best: &mut Option<(f64, usize, FusionModel)>,
    mse: f64,
    epoch: usize,
    model: &FusionModel,
) {
    if best.as_ref().is_none_or(|b| mse < b.0) {
        *best = Some((mse, epoch, model.clone()));
    }
}

/// Mini-batch Adam with global-norm clipping. Keeps the epoch whose
/// validation MSE is lowest; when `val` is empty the training set is used
/// for selection.
pub fn train(
    mut model: FusionModel,
    train_set: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let selection = if val.is_empty() { train_set } else { val };
    let mut adam = AdamState::new(model.params(), cfg.lr);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, FusionModel)> = None;
    let mut steps = 0usize;
    let cap = cfg.max_steps.unwrap_or(usize::MAX);

    'epochs: for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seed::rng(cfg.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let mut drop = DropoutCtx::train(cfg.dropout_rate, cfg.seed, steps as u64);
            let (loss, mut grads) = model.loss_and_grads(&batch, &mut drop)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFinite { step: steps, loss });
            }
            grads.clip_global_norm(cfg.clip_norm);
            adam.step(model.params_mut(), &grads);
            steps += 1;
            loss_sum += loss;
            batches += 1;
            if steps >= cap {
                let val_mse = evaluate_mse(&model, selection)?;
                history.push(EpochRecord {
                    epoch,
                    train_mse: loss_sum / batches as f64,
                    val_mse,
                    steps,
                });
                keep_best(&mut best, val_mse, epoch, &model);
                break 'epochs;
            }
        }
        let val_mse = evaluate_mse(&model, selection)?;
        if !val_mse.is_finite() {
            return Err(ModelError::NonFinite {
                step: steps,
                loss: val_mse,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_mse: loss_sum / batches as f64,
            val_mse,
            steps,
        });
        keep_best(&mut best, val_mse, epoch, &model);
        if cfg.target_mse.is_some_and(|t| val_mse <= t) {
            break;
        }
    }
    let (best_val_mse, best_epoch, model) = best.expect("at least one epoch runs");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_mse,
        steps,
    })
}
