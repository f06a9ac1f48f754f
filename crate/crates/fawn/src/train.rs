//! Dataset splitting and the minibatch training loop with best-checkpoint
//! selection on validation loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss_and_grads, fawn_loss, FawnParams};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::rng::SplitMix64;
use crate::sample::CsiSample;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Drives the dataset split, weight init, and epoch shuffles.
    pub seed: u64,
    /// Train/validation/test fractions; must sum to 1.
    pub split: (f64, f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 42,
            split: (0.8, 0.1, 0.1),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config {
                key: "epochs".into(),
                message: format!("must be >= 1, got {}", self.epochs),
            });
        }
        if self.batch_size < 1 {
            return Err(Error::Config {
                key: "batch".into(),
                message: "must be >= 1".into(),
            });
        }
        if !(self.adam.lr.is_finite() && self.adam.lr > 0.0) {
            return Err(Error::Config {
                key: "lr".into(),
                message: format!("must be finite and positive, got {}", self.adam.lr),
            });
        }
        let (a, b, c) = self.split;
        for (name, f) in [("train", a), ("val", b), ("test", c)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config {
                    key: "split".into(),
                    message: format!("{name} fraction {f} outside [0, 1]"),
                });
            }
        }
        if (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::Config {
                key: "split".into(),
                message: format!("fractions sum to {}, expected 1", a + b + c),
            });
        }
        Ok(())
    }
}

/// Per-epoch mean train and validation losses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

/// Seeded shuffle, then contiguous slices. Validation and test sizes are
/// floors of their fractions; the remainder goes to train.
pub fn split_dataset(
    samples: Vec<CsiSample>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<CsiSample>, Vec<CsiSample>, Vec<CsiSample>)> {
    if samples.is_empty() {
        return Err(Error::Contract("split_dataset: empty input".into()));
    }
    let n = samples.len();
    let n_val = (fractions.1 * n as f64).floor() as usize;
    let n_test = (fractions.2 * n as f64).floor() as usize;
    if n_val + n_test > n {
        return Err(Error::Contract(format!(
            "split_dataset: val {n_val} + test {n_test} exceed {n} samples"
        )));
    }
    let n_train = n - n_val - n_test;
    let mut shuffled = samples;
    SplitMix64::new(seed).shuffle(&mut shuffled);
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    Ok((shuffled, val, test))
}

/// Per-sample losses and the batch-mean gradient, fanned out over the
/// worker pool. Gradients are summed in sample order so the result does
/// not depend on thread count.
pub fn batch_mean_loss_and_grads(
    params: &FawnParams,
    batch: &[&CsiSample],
) -> Result<(Vec<f64>, Vec<Tensor>)> {
    combine(batch.len(), map_indexed(batch.len(), |i| loss_and_grads(params, batch[i])))
}

/// Sequential reference path; bit-identical to the parallel one.
pub fn batch_mean_loss_and_grads_seq(
    params: &FawnParams,
    batch: &[&CsiSample],
) -> Result<(Vec<f64>, Vec<Tensor>)> {
    combine(batch.len(), map_indexed_seq(batch.len(), |i| loss_and_grads(params, batch[i])))
}

fn combine(
    n: usize,
    results: Vec<Result<(f64, Vec<Tensor>)>>,
) -> Result<(Vec<f64>, Vec<Tensor>)> {
    let mut losses = Vec::with_capacity(n);
    let mut mean: Option<Vec<Tensor>> = None;
    for result in results {
        let (loss, grads) = result?;
        losses.push(loss);
        match &mut mean {
            None => mean = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    for (a_k, g_k) in a.data_mut().iter_mut().zip(g.data()) {
                        *a_k += g_k;
                    }
                }
            }
        }
    }
    let mut mean = mean.ok_or_else(|| Error::Contract("empty batch".into()))?;
    let scale = 1.0 / n as f64;
    for t in &mut mean {
        for v in t.data_mut() {
            *v *= scale;
        }
    }
    Ok((losses, mean))
}

/// Mean loss over a sample set with fixed (read-only) parameters.
pub fn mean_loss(params: &FawnParams, set: &[CsiSample]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Contract("mean_loss: empty set".into()));
    }
    let losses = map_indexed(set.len(), |i| fawn_loss(params, &set[i]));
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / set.len() as f64)
}

/// Trains from a fresh initialization. Per epoch: seeded shuffle,
/// minibatches with gradients averaged over the batch, one Adam step per
/// batch; train and validation means are recorded and the parameters
/// with the lowest validation loss are returned. An empty validation set
/// falls back to the epoch's train loss for checkpoint selection.
pub fn train(
    train_set: &[CsiSample],
    val_set: &[CsiSample],
    config: &TrainConfig,
    rng: &mut SplitMix64,
) -> Result<(FawnParams, TrainingHistory)> {
    train_with_progress(train_set, val_set, config, rng, |_, _, _| {})
}

/// `train` with a per-epoch callback `(epoch, train_loss, val_loss)`.
pub fn train_with_progress(
    train_set: &[CsiSample],
    val_set: &[CsiSample],
    config: &TrainConfig,
    rng: &mut SplitMix64,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(FawnParams, TrainingHistory)> {
    if train_set.is_empty() {
        return Err(Error::Contract("train: empty training set".into()));
    }
    config.validate()?;
    let mut params = FawnParams::init(rng);
    let mut adam = AdamState::new(
        &params.named_tensors().iter().map(|(_, t)| *t).collect::<Vec<_>>(),
    );
    let mut history = TrainingHistory::default();
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&CsiSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (losses, grads) = batch_mean_loss_and_grads(&params, &batch)?;
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx });
            }
            epoch_loss_sum += losses.iter().sum::<f64>();
            let mut slots = params.tensors_mut();
            adam_step(
                &mut slots,
                &grads.iter().collect::<Vec<_>>(),
                &mut adam,
                &config.adam,
            )?;
        }
        let train_loss = epoch_loss_sum / train_set.len() as f64;
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            mean_loss(&params, val_set)?
        };
        history.train.push(train_loss);
        history.val.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_params = params.clone();
        }
    }
    Ok((best_params, history))
}
