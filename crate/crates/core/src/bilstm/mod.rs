//! Single-layer bidirectional LSTM sequence-to-one classifier with
//! hand-written backpropagation through time.
//!
//! The forward cell reads columns `1..m`, the backward cell reads `m..1`,
//! and the classifier sees `V = [h_m ; g_1]` (the backward cell's state
//! after it has consumed the whole reversed sequence). Dropout is inverted
//! dropout on `V`, followed by a dense layer and softmax. The loss is the
//! cross-entropy at that single output.

mod cell;
mod checkpoint;
mod gradcheck;
mod model;
mod optim;
mod train;

pub use cell::{CellParams, Gate, StepCache};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, gradient_check_report, reference_loss, GradCheckReport};
pub use model::{
    argmax, cross_entropy, cross_entropy_from_logits, softmax, BiLstmModel, ForwardPass,
    ModelConfig, Params, SequenceStates,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    evaluate_loss, train, train_with_validator, EarlyStopping, EpochRecord, Observation,
    StopReason, TrainHistory, ValidationMetrics,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has feature dimension {found}, model expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("sequence has no columns")]
    EmptySequence,
    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("non-finite activation in the {gate} gate")]
    NonFiniteActivation { gate: &'static str },
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: &'static str },
    #[error("training loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl ModelError {
    pub fn is_numeric_fault(&self) -> bool {
        matches!(
            self,
            ModelError::NonFiniteActivation { .. }
                | ModelError::NonFiniteGradient { .. }
                | ModelError::NonFiniteLoss { .. }
        )
    }
}

/// Optimizer and schedule settings. Defaults: RMSprop, learning rate 1e-4,
/// momentum 0.9, gradient decay 0.9, squared-gradient decay 0.99,
/// epsilon 1e-8, 30 epochs, patience 5, dropout 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub squared_grad_decay: f64,
    pub grad_decay: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: Option<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::RmsProp,
            learning_rate: 1e-4,
            momentum: 0.90,
            squared_grad_decay: 0.99,
            grad_decay: 0.90,
            epsilon: 1e-8,
            max_epochs: 30,
            patience: Some(5),
            dropout_rate: 0.5,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.patience == Some(0) {
            problems.push("patience must be at least 1 when set".to_string());
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            problems.push(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        for (name, v) in [
            ("momentum", self.momentum),
            ("squared_grad_decay", self.squared_grad_decay),
            ("grad_decay", self.grad_decay),
        ] {
            if !(0.0..1.0).contains(&v) {
                problems.push(format!("{name} {v} outside [0, 1)"));
            }
        }
        if self.epsilon <= 0.0 {
            problems.push("epsilon must be positive".to_string());
        }
        if matches!(self.clip_norm, Some(c) if c <= 0.0) {
            problems.push("clip_norm must be positive when set".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(problems))
        }
    }
}
