use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{CnnModel, InputShape, Mode};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            dropout_rate: 0.5,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("learning_rate must be >= 0 and momentum in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Labeled channel-major inputs of one shape.
#[derive(Debug, Clone, Default)]
pub struct Dataset<T = f32> {
    pub inputs: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, input: Vec<T>, label: usize) {
        self.inputs.push(input);
        self.labels.push(label);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy on the held-out split; NaN when there is none.
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    /// CSV with columns `epoch,train_loss,val_acc`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["epoch", "train_loss", "val_acc"]).map_err(|e| csv_error(path, e))?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_acc.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Fraction of `indices` whose argmax prediction equals the label.
pub fn accuracy<T: Scalar>(model: &CnnModel<T>, data: &Dataset<T>, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let inputs: Vec<&[T]> = indices.iter().map(|&i| data.inputs[i].as_slice()).collect();
    let probs = model.predict(&inputs, Mode::Eval)?;
    let correct = probs
        .iter()
        .zip(indices)
        .filter(|(p, &i)| argmax(p) == data.labels[i])
        .count();
    Ok(correct as f64 / indices.len() as f64)
}

fn argmax<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD with momentum on mean cross-entropy.
///
/// The sample order of each epoch and the dropout masks derive from
/// `cfg.seed`, so a run is reproducible regardless of thread count.
/// `cfg.dropout_rate` overrides the rate of every dropout layer.
pub fn train<T: Scalar>(model: &mut CnnModel<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    let k = model.num_classes();
    if let Some(bad) = data.labels.iter().find(|&&l| l >= k) {
        return Err(Error::data(format!("label {bad} out of range for {k} classes")));
    }
    let expected = {
        let InputShape { height, width, channels } = model.input_shape();
        height * width * channels
    };
    if data.inputs.iter().any(|x| x.len() != expected) {
        return Err(Error::data(format!("every input must have {expected} values")));
    }
    let mut seen = vec![false; k];
    data.labels.iter().for_each(|&l| seen[l] = true);
    if seen.iter().any(|s| !s) {
        log::warn!("training labels do not cover all {k} classes");
    }
    for layer in model.layers_mut() {
        if let super::Layer::Dropout { rate } = layer {
            *rate = cfg.dropout_rate as f32;
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seed::derived_rng(cfg.seed, &[0xDA7A]));
    let n_val = ((data.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let lr = T::from_f64(cfg.learning_rate);
    let mu = T::from_f64(cfg.momentum);
    let mut velocity: Vec<Vec<T>> = model.params().iter().map(|p| vec![T::ZERO; p.len()]).collect();
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut seed::derived_rng(cfg.seed, &[0xE90C, epoch as u64]));
        let mut loss_sum = 0.0;
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&[T]> = batch.iter().map(|&i| data.inputs[i].as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let mode = Mode::Train {
                seed: seed::derive(cfg.seed, &[0xD209, epoch as u64, b as u64]),
            };
            let (loss, grads) = model.loss_and_grads(&inputs, &labels, mode)?;
            loss_sum += loss * batch.len() as f64;
            model.apply(&grads, |i, p, g| {
                let v = &mut velocity[i];
                for ((w, vel), &gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vel = mu * *vel - lr * gi;
                    *w += *vel;
                }
            });
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / train_idx.len() as f64,
            val_acc: accuracy(model, data, val_idx)?,
        };
        log::info!(
            "epoch {:>3}: train loss {:.4}, val acc {:.4}",
            stats.epoch,
            stats.train_loss,
            stats.val_acc
        );
        history.epochs.push(stats);
    }
    Ok(history)
}
