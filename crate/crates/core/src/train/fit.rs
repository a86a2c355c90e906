use serde::{Deserialize, Serialize};

use super::config::{ModelKind, TrainConfig};
use super::metrics::{evaluate, EvalReport};
use crate::dataset::{DatasetSplit, LabeledInstance};
use crate::error::{Error, Result};
use crate::models::{apply_stat_updates, AnyModel, CnnModel, GinModel, Surrogate};
use crate::rng::{derive_seed, Rng};
use crate::tensor::{clip_grad_norm, AdamState, Mode, Scalar, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest validation MAE.
    pub model: M,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Validation report of the returned model.
    pub val_report: EvalReport,
}

/// Untrained model described by `cfg`, initialized from a stream of `cfg.seed`.
pub fn build_model<T: Scalar>(cfg: &TrainConfig) -> Result<AnyModel<T>> {
    let seed = derive_seed(cfg.seed, 0);
    Ok(match cfg.model {
        ModelKind::Cnn => CnnModel::new(seed).into(),
        ModelKind::Gin => GinModel::new(cfg.gin_config(), seed)?.into(),
    })
}

/// Mini-batch Adam on the mean squared error against γ.
///
/// With `cfg.standardize_targets` the model's output map is first set to the
/// training labels' mean and standard deviation, so the loss is the MSE in
/// standardized units scaled by the variance.
///
/// Each epoch visits the training set in an order drawn from `cfg.seed`,
/// clips the global gradient norm per batch, and then scores the validation
/// set. Training stops after `patience` epochs without a strictly lower
/// validation MAE or after `max_epochs`; the best epoch's parameters are
/// returned. A non-finite batch loss aborts with [`Error::Diverged`].
pub fn train<T: Scalar, M: Surrogate<T>>(
    mut model: M,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::param("training needs non-empty train and validation sets"));
    }
    if cfg.standardize_targets {
        let (mean, std) = label_moments(&split.train);
        let affine = model.output_affine();
        affine.set(model.params_mut(), mean, if std > 0.0 { std } else { 1.0 })?;
    }
    let mut adam = AdamState::new(cfg.lr);
    let mut order_rng = Rng::new(derive_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, M)> = None;

    for epoch in 1..=cfg.max_epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let items: Vec<&LabeledInstance> = chunk.iter().map(|&i| &split.train[i]).collect();
            let loss = step(&mut model, &mut adam, &items, cfg.clip_norm)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    lr: cfg.lr,
                });
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_mae = evaluate(&model, &split.val)?.mae();
        if !val_mae.is_finite() {
            let batch = order.len().div_ceil(cfg.batch_size);
            return Err(Error::Diverged {
                epoch,
                batch,
                lr: cfg.lr,
            });
        }
        log::info!("epoch {epoch}: train_loss {train_loss:.5} val_mae {val_mae:.5}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_mae,
        });

        match &best {
            Some((_, best_mae, _)) if val_mae >= *best_mae => {}
            _ => best = Some((epoch, val_mae, model.clone())),
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            log::info!("no improvement for {} epochs, stopping", cfg.patience);
            break;
        }
    }

    let (best_epoch, _, model) = best.ok_or_else(|| Error::contract("no epoch completed"))?;
    let val_report = evaluate(&model, &split.val)?;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        val_report,
    })
}

/// Mean and population standard deviation of γ.
fn label_moments(items: &[LabeledInstance]) -> (f64, f64) {
    let n = items.len() as f64;
    let mean = items.iter().map(|i| i.gamma as f64).sum::<f64>() / n;
    let var = items.iter().map(|i| (i.gamma as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One optimizer update; returns the batch loss.
fn step<T: Scalar, M: Surrogate<T>>(
    model: &mut M,
    adam: &mut AdamState<T>,
    items: &[&LabeledInstance],
    clip_norm: f64,
) -> Result<f64> {
    let graphs: Vec<_> = items.iter().map(|i| &i.graph).collect();
    let targets: Vec<f64> = items.iter().map(|i| i.gamma as f64).collect();
    let (loss, grads, stats) = {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &graphs, Mode::Train)?;
        let target = tape.constant(Tensor::from_f64([items.len(), 1], &targets)?);
        let loss = tape.mse_loss(fwd.output, target)?;
        let value = tape.value(loss).item()?.as_f64();
        if !value.is_finite() {
            return Ok(value);
        }
        (value, tape.backward(loss)?, fwd.stat_updates(&tape))
    };
    let params = model.params_mut();
    params.zero_grad();
    params.accumulate(&grads)?;
    clip_grad_norm(params, clip_norm)?;
    adam.step(params)?;
    apply_stat_updates(params, &stats);
    Ok(loss)
}
