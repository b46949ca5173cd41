//! Seeded minibatch training with a stepwise learning-rate schedule.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub minibatch_size: usize,
    pub initial_lr: f64,
    /// Learning rate is multiplied by this factor every `lr_drop_period_epochs`.
    pub lr_decay_factor: f64,
    pub lr_drop_period_epochs: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::stage1_pretrain()
    }
}

impl TrainConfig {
    /// ES-NET pre-exploration.
    pub fn stage1_explore() -> Self {
        TrainConfig {
            epochs: 300,
            ..TrainConfig::stage1_pretrain()
        }
    }

    /// SP-NET pretraining.
    pub fn stage1_pretrain() -> Self {
        TrainConfig {
            minibatch_size: 5,
            initial_lr: 0.005,
            lr_decay_factor: 0.9,
            lr_drop_period_epochs: 20,
            epochs: 200,
            seed: 0,
        }
    }

    /// PE-NET fine-tuning.
    pub fn stage2() -> Self {
        TrainConfig {
            minibatch_size: 2,
            initial_lr: 1e-4,
            lr_decay_factor: 0.8,
            lr_drop_period_epochs: 20,
            epochs: 100,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrainConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch_size == 0
            || !(self.initial_lr > 0.0)
            || !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0)
            || self.lr_drop_period_epochs == 0
        {
            return Err(Error::Config(format!("invalid training configuration: {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.lr_drop_period_epochs) as i32;
        self.initial_lr * self.lr_decay_factor.powi(drops)
    }
}

/// Shuffled minibatch index lists; the short tail batch is kept.
pub fn minibatches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(<[usize]>::to_vec).collect()
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("mse of an empty vector".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape {
            context: "mse",
            expected: pred.len(),
            got: target.len(),
        });
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean training MSE seen during each epoch.
    pub loss_history: Vec<f64>,
}

/// Minimizes the MSE of `mlp(x)` against `y` with Adam.
pub fn fit(mlp: &mut Mlp, x: &[Vec<f64>], y: &[Vec<f64>], config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("training set has no samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Shape {
            context: "training targets",
            expected: x.len(),
            got: y.len(),
        });
    }
    let out_dim = mlp.output_dim();
    if let Some(bad) = y.iter().find(|t| t.len() != out_dim) {
        return Err(Error::Shape {
            context: "training target width",
            expected: out_dim,
            got: bad.len(),
        });
    }

    let mut rng = crate::seed::rng(config.seed);
    let mut adam = AdamState::new(mlp.num_params());
    let mut grads = vec![0.0; mlp.num_params()];
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let mut epoch_loss = 0.0;
        for batch in minibatches(x.len(), config.minibatch_size, &mut rng) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let denom = (batch.len() * out_dim) as f64;
            for &i in &batch {
                let trace = mlp.forward_trace(&x[i])?;
                let upstream: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(&y[i])
                    .map(|(p, t)| 2.0 * (p - t) / denom)
                    .collect();
                epoch_loss += mse(trace.output(), &y[i])?;
                mlp.backward_into(&trace, &upstream, &mut grads)?;
            }
            adam.update(mlp.params_mut(), &grads, lr).map_err(|e| with_epoch(e, epoch))?;
        }
        let mean = epoch_loss / x.len() as f64;
        if !mean.is_finite() || !mlp.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("training loss became {mean}"),
            });
        }
        history.push(mean);
    }
    Ok(FitReport { loss_history: history })
}

pub(crate) fn with_epoch(err: Error, epoch: usize) -> Error {
    match err {
        Error::Diverged { reason, .. } => Error::Diverged { epoch, reason },
        other => other,
    }
}
