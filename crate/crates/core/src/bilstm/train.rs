use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax, cross_entropy_from_logits, BiLstmModel};
use super::optim::Optimizer;
use super::{ModelError, TrainConfig};
use crate::features::FeatureSequence;

/// Validation loss and accuracy after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

/// Validation patience: counts epochs whose loss is not strictly below the
/// best seen so far; the count resets on improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: Option<usize>,
    best: f64,
    best_epoch: usize,
    strikes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            strikes: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
            self.strikes = 0;
        } else {
            self.strikes += 1;
        }
        let stop = self.patience.is_some_and(|p| self.strikes >= p);
        Observation { improved, stop }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Mean inference-mode loss and accuracy over a set.
pub fn evaluate_loss(
    model: &BiLstmModel,
    set: &[FeatureSequence],
) -> Result<ValidationMetrics, ModelError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for seq in set {
        let pass = model.forward(seq, false, &mut rng)?;
        loss += cross_entropy_from_logits(&pass.logits, seq.label);
        if argmax(&pass.probs) == seq.label {
            correct += 1;
        }
    }
    let n = set.len().max(1) as f64;
    Ok(ValidationMetrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

/// Trains one sequence at a time with a per-epoch seeded shuffle, applying
/// validation patience on `val_set`. Returns the best-validation parameters,
/// or the final ones when `val_set` is empty.
pub fn train(
    model: BiLstmModel,
    train_set: &[FeatureSequence],
    val_set: &[FeatureSequence],
    config: &TrainConfig,
) -> Result<(BiLstmModel, TrainHistory), ModelError> {
    train_with_validator(model, train_set, config, |m| {
        if val_set.is_empty() {
            Ok(None)
        } else {
            evaluate_loss(m, val_set).map(Some)
        }
    })
}

/// Training loop with a caller-supplied end-of-epoch validation.
pub fn train_with_validator<F>(
    mut model: BiLstmModel,
    train_set: &[FeatureSequence],
    config: &TrainConfig,
    mut validate: F,
) -> Result<(BiLstmModel, TrainHistory), ModelError>
where
    F: FnMut(&BiLstmModel) -> Result<Option<ValidationMetrics>, ModelError>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    model.config.dropout = config.dropout_rate;
    model.config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config, &model.params);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<BiLstmModel> = None;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let seq = &train_set[k];
            let (loss, grads, _) = model.compute_gradients(seq, seq.label, true, &mut rng)?;
            total += loss;
            optimizer.step(&mut model.params, &grads);
        }
        let train_loss = total / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }

        let val = validate(&model)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.map(|v| v.loss),
            val_accuracy: val.map(|v| v.accuracy),
        });
        if let Some(v) = val {
            let obs = stopper.observe(epoch, v.loss);
            if obs.improved {
                best = Some(model.clone());
            }
            if obs.stop {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    let last_epoch = epochs.last().map_or(0, |e| e.epoch);
    let (model, best_epoch) = match best {
        Some(b) => (b, stopper.best_epoch()),
        None => (model, last_epoch),
    };
    Ok((
        model,
        TrainHistory {
            epochs,
            best_epoch,
            stop_reason,
        },
    ))
}
