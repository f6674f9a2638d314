use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, MlpModel};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Minibatch Adam with early stopping on validation accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds minibatch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if positive {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (1-based).
    pub best_epoch: usize,
    pub best_val_acc: Option<f64>,
}

pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub(crate) fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Trains `model` on `train`.
///
/// With a validation set, the parameters of the epoch with the highest
/// validation accuracy are returned (earliest epoch on ties) and training
/// stops `patience` epochs after the last improvement. Without one, all
/// `max_epochs` run and the final parameters are returned.
pub fn train(
    mut model: MlpModel,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    for d in std::iter::once(train).chain(val) {
        if d.dim() != model.input_dim() {
            return Err(Error::Dimension {
                expected: model.input_dim(),
                got: d.dim(),
            });
        }
        if d.n_classes() != model.n_classes() {
            return Err(Error::Dimension {
                expected: model.n_classes(),
                got: d.n_classes(),
            });
        }
    }

    let mut rng = rng_for(cfg.seed, &["shuffle"]);
    let mut params = model.params();
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best_params = params.clone();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = model.loss_and_grad(train, batch);
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut params, &grads.flatten(), cfg);
            model.set_params(&params);
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_acc = val.map(|v| model.accuracy(v));
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_acc,
        });
        match val_acc {
            Some(acc) => {
                if history.best_val_acc.is_none_or(|b| acc > b) {
                    history.best_val_acc = Some(acc);
                    history.best_epoch = epoch;
                    best_params.copy_from_slice(&params);
                }
                if epoch - history.best_epoch >= cfg.patience {
                    break;
                }
            }
            None => {
                history.best_epoch = epoch;
                best_params.copy_from_slice(&params);
            }
        }
    }
    model.set_params(&best_params);
    Ok((model, history))
}
