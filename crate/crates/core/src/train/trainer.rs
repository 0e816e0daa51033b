use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use crate::data::WindowSet;
use crate::error::{config_err, Error, Result};
use crate::pipeline::Pipeline;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict improvement in validation peak-MSE before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            betas: [0.9, 0.999],
            eps: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(config_err!("patience must be at least 1"));
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) || !(self.eps > 0.0) {
            return Err(config_err!("adam betas must lie in [0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_peak_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Validation peak-MSE of the initial parameters.
    pub initial_val_peak_mse: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub best_val_peak_mse: f64,
    pub stopped_early: bool,
}

/// Mean squared error of predicted against true peaks over every window,
/// day and channel.
pub fn peak_mse(pipeline: &Pipeline, windows: &WindowSet) -> Result<f64> {
    if windows.is_empty() {
        return Err(config_err!("no windows to evaluate"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in windows.iter() {
        let pred = pipeline.predict(&s)?;
        for (p, t) in pred.peaks.data().iter().zip(s.y_peak.data()) {
            sum += (p - t) * (p - t);
        }
        count += s.y_peak.len();
    }
    Ok(sum / count as f64)
}

/// Mini-batch training with early stopping on validation peak-MSE. The
/// parameters of the best validation epoch are restored before returning.
pub fn train(
    pipeline: &mut Pipeline,
    train_set: &WindowSet,
    val_set: &WindowSet,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(config_err!(
            "training needs at least one train and one validation window ({} / {})",
            train_set.len(),
            val_set.len()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shapes: Vec<_> = pipeline.params().iter().map(|p| p.value.shape()).collect();
    let mut opt = match config.optimizer {
        OptimizerKind::Sgd => Optimizer::sgd(config.learning_rate),
        OptimizerKind::Adam => Optimizer::adam(
            config.learning_rate,
            (config.betas[0], config.betas[1]),
            config.eps,
            &shapes,
        ),
    };

    let initial = peak_mse(pipeline, val_set)?;
    let mut history = History {
        initial_val_peak_mse: initial,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_peak_mse: initial,
        stopped_early: false,
    };
    let mut best = pipeline.param_values();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let samples: Vec<_> = batch.iter().map(|&i| train_set.get(i)).collect();
            let (losses, grads) = pipeline.batch_loss_and_grads(&samples)?;
            for loss in losses {
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, loss });
                }
                loss_sum += loss;
            }
            let mut params = pipeline.params_mut();
            let mut values: Vec<&mut Matrix> = params.iter_mut().map(|p| &mut p.value).collect();
            opt.step(&mut values, &grads);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val = peak_mse(pipeline, val_set)?;
        if !val.is_finite() {
            return Err(Error::Divergence { epoch, loss: val });
        }
        debug!("epoch {epoch}: train {train_loss:.6} val peak-mse {val:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_peak_mse: val,
        });
        if val < history.best_val_peak_mse {
            history.best_val_peak_mse = val;
            history.best_epoch = epoch;
            best = pipeline.param_values();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    pipeline.set_param_values(&best)?;
    Ok(history)
}
