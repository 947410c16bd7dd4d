//! Metrics, data splits, majority voting and k-fold cross-validation.

mod metrics;
mod split;
mod vote;

pub use metrics::{
    confusion_matrix, render_aggregate_table, render_report_table, AggregateReport,
    ConfusionMatrix, EvalReport, MeanSe,
};
pub use split::{k_fold, split, PlanKind, SplitPlan, DEFAULT_RATIOS};
pub use vote::majority_vote;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilstm::{self, BiLstmModel, ModelConfig, ModelError, TrainConfig, TrainHistory};
use crate::features::FeatureSequence;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class {class} out of range for {class_count} classes")]
    ClassOutOfRange { class: usize, class_count: usize },
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Predicts every sequence and builds the report.
pub fn evaluate_model(
    model: &BiLstmModel,
    sequences: &[FeatureSequence],
    fold: Option<usize>,
) -> Result<EvalReport, EvalError> {
    let predictions = sequences
        .iter()
        .map(|s| model.classify(s))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = sequences.iter().map(|s| s.label).collect();
    let cm = confusion_matrix(&predictions, &labels, model.config.class_count)?;
    Ok(EvalReport::from_confusion(cm, fold))
}

/// Cross-validation settings beyond the model and optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Share of each fold's training portion held out for validation
    /// patience.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            validation_fraction: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub plan: SplitPlan,
    pub folds: Vec<EvalReport>,
    pub histories: Vec<TrainHistory>,
    pub aggregate: AggregateReport,
}

fn pick(dataset: &[FeatureSequence], idx: &[usize]) -> Vec<FeatureSequence> {
    idx.iter().map(|&i| dataset[i].clone()).collect()
}

/// One independent training per fold. Fold `k` initialises and trains with
/// seed `train_config.seed + k`; folds run in parallel and are reported in
/// fold order.
pub fn cross_validate(
    dataset: &[FeatureSequence],
    model_config: ModelConfig,
    train_config: &TrainConfig,
    cv: &CvConfig,
) -> Result<CvResult, EvalError> {
    let class_count = model_config.class_count;
    let labels: Vec<usize> = dataset.iter().map(|s| s.label).collect();
    let plan = k_fold(&labels, class_count, cv.folds, cv.seed)?;

    let outcomes: Vec<Result<(EvalReport, TrainHistory), EvalError>> = (0..plan.fold_count())
        .into_par_iter()
        .map(|k| {
            let (train_idx, test_idx) = plan.fold(k).expect("fold in range");
            let fold_seed = train_config.seed.wrapping_add(k as u64);

            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let vf = cv.validation_fraction;
            let inner = split(&train_labels, class_count, [1.0 - vf, vf, 0.0], fold_seed)?;
            let (fit_pos, val_pos) = match inner.kind {
                PlanKind::Holdout {
                    train, validation, ..
                } => (train, validation),
                PlanKind::KFold { .. } => unreachable!("split returns a holdout plan"),
            };
            let fit_idx: Vec<usize> = fit_pos.iter().map(|&p| train_idx[p]).collect();
            let val_idx: Vec<usize> = val_pos.iter().map(|&p| train_idx[p]).collect();

            let config = TrainConfig {
                seed: fold_seed,
                ..train_config.clone()
            };
            let model = BiLstmModel::new(model_config, fold_seed)?;
            let (model, history) = bilstm::train(
                model,
                &pick(dataset, &fit_idx),
                &pick(dataset, &val_idx),
                &config,
            )?;
            let report = evaluate_model(&model, &pick(dataset, &test_idx), Some(k))?;
            Ok((report, history))
        })
        .collect();

    let mut folds = Vec::with_capacity(outcomes.len());
    let mut histories = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (report, history) = outcome?;
        folds.push(report);
        histories.push(history);
    }
    let aggregate = AggregateReport::from_folds(&folds);
    Ok(CvResult {
        plan,
        folds,
        histories,
        aggregate,
    })
}
