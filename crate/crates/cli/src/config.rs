//! Pipeline configuration, read from a TOML file with one table per stage.
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use regionseq::annotation::SchemaMapping;
use regionseq::bilstm::{ModelConfig, ModelError, OptimizerKind, TrainConfig};
use regionseq::ScanStrategy;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Slide raster: PNG, or `.rgb`/`.raw` with a `.dims` sidecar.
    pub slide: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub classes: Vec<String>,
    pub output_dir: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            slide: None,
            annotations: None,
            classes: vec!["Benign".into(), "InSitu".into(), "Invasive".into()],
            output_dir: PathBuf::from("regionseq-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsSection {
    pub normalize_rotation: bool,
}

impl Default for RegionsSection {
    fn default() -> Self {
        Self {
            normalize_rotation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileSection {
    pub patch_side: usize,
    pub strategy: ScanStrategy,
    /// Also write every patch as a PNG under `tiles/`.
    pub write_patches: bool,
}

impl Default for TileSection {
    fn default() -> Self {
        Self {
            patch_side: regionseq::scan::DEFAULT_PATCH_SIDE,
            strategy: ScanStrategy::Scan2,
            write_patches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub extractor: String,
    /// Block grid of the toy extractor; D = grid² · 6.
    pub grid: usize,
    /// Precomputed features (e.g. CNN activations) to train on instead of
    /// running the extractor.
    pub external_manifest: Option<PathBuf>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            extractor: "toy".into(),
            grid: 4,
            external_manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_size: usize,
    pub bidirectional: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            bidirectional: true,
        }
    }
}

/// Unset fields fall back to the defaults for the configured class count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<OptimizerKind>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub squared_grad_decay: Option<f64>,
    pub grad_decay: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_epochs: Option<usize>,
    /// 0 disables early stopping.
    pub patience: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub seed: Option<u64>,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Holdout,
    Kfold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// What `run-all` does after feature extraction: train + evaluate on a
    /// holdout split, or k-fold cross-validation.
    pub mode: SplitMode,
    /// Train / validation / test shares for the holdout split.
    pub ratios: [f64; 3],
    pub folds: usize,
    /// Share of each fold's training part held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            mode: SplitMode::Kfold,
            ratios: regionseq::eval::DEFAULT_RATIOS,
            folds: 10,
            validation_fraction: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    /// Annotation XML layout; its class list is taken from `data.classes`.
    pub schema: SchemaMapping,
    pub regions: RegionsSection,
    pub tile: TileSection,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub split: SplitSection,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    /// Reads and parses `path`, resolving relative paths against its
    /// directory. Does not validate.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let d = &mut self.data;
        d.slide = d.slide.as_deref().map(|p| resolve(base, p));
        d.annotations = d.annotations.as_deref().map(|p| resolve(base, p));
        d.output_dir = resolve(base, &d.output_dir);
        self.features.external_manifest = self
            .features
            .external_manifest
            .as_deref()
            .map(|p| resolve(base, p));
    }

    pub fn schema(&self) -> SchemaMapping {
        self.schema.clone().with_classes(self.data.classes.iter().cloned())
    }

    /// Training settings: RMSprop with dropout 0.5, or ADAM with dropout 0.6
    /// for four classes, overridden by whatever the `[train]` table sets.
    pub fn train_config(&self) -> TrainConfig {
        let four = self.data.classes.len() == 4;
        let d = TrainConfig {
            optimizer: if four {
                OptimizerKind::Adam
            } else {
                OptimizerKind::RmsProp
            },
            dropout_rate: if four { 0.6 } else { 0.5 },
            ..TrainConfig::default()
        };
        let t = &self.train;
        TrainConfig {
            optimizer: t.optimizer.unwrap_or(d.optimizer),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            momentum: t.momentum.unwrap_or(d.momentum),
            squared_grad_decay: t.squared_grad_decay.unwrap_or(d.squared_grad_decay),
            grad_decay: t.grad_decay.unwrap_or(d.grad_decay),
            epsilon: t.epsilon.unwrap_or(d.epsilon),
            max_epochs: t.max_epochs.unwrap_or(d.max_epochs),
            patience: match t.patience {
                Some(0) => None,
                Some(p) => Some(p),
                None => d.patience,
            },
            dropout_rate: t.dropout_rate.unwrap_or(d.dropout_rate),
            seed: t.seed.unwrap_or(d.seed),
            clip_norm: t.clip_norm.or(d.clip_norm),
        }
    }

    pub fn model_config(&self, input_size: usize, class_count: usize) -> ModelConfig {
        let mut m = ModelConfig::new(input_size, self.model.hidden_size, class_count)
            .with_dropout(self.train_config().dropout_rate);
        m.bidirectional = self.model.bidirectional;
        m
    }

    /// Checks everything that does not depend on stage inputs, plus the
    /// paths in `required`. All problems are reported together.
    pub fn validate(&self, required: &[Required]) -> CliResult<()> {
        let mut problems = Vec::new();
        let classes = &self.data.classes;
        if classes.is_empty() {
            problems.push("data.classes must list at least one class".to_string());
        }
        let unique: BTreeSet<&String> = classes.iter().collect();
        if unique.len() != classes.len() {
            problems.push("data.classes contains duplicates".to_string());
        }
        if self.tile.patch_side == 0 {
            problems.push("tile.patch_side must be at least 1".to_string());
        }
        if self.features.extractor != "toy" {
            problems.push(format!(
                "features.extractor \"{}\" is not available (supported: toy; use features.external_manifest for precomputed features)",
                self.features.extractor
            ));
        }
        if self.features.grid == 0 {
            problems.push("features.grid must be at least 1".to_string());
        }
        if self.model.hidden_size == 0 {
            problems.push("model.hidden_size must be at least 1".to_string());
        }
        if let Err(ModelError::InvalidConfig(list)) = self.train_config().validate() {
            problems.extend(list.into_iter().map(|p| format!("train.{p}")));
        }
        let s = &self.split;
        if s.ratios.iter().any(|r| !(0.0..=1.0).contains(r))
            || (s.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            problems.push(format!(
                "split.ratios {:?} must be non-negative and sum to 1",
                s.ratios
            ));
        }
        if s.folds < 2 {
            problems.push("split.folds must be at least 2".to_string());
        }
        if !(s.validation_fraction > 0.0 && s.validation_fraction < 1.0) {
            problems.push(format!(
                "split.validation_fraction {} outside (0, 1)",
                s.validation_fraction
            ));
        }
        if !(self.schema.coordinate_scale > 0.0 && self.schema.coordinate_scale.is_finite()) {
            problems.push("schema.coordinate_scale must be positive".to_string());
        }
        for req in required {
            let (name, path) = match req {
                Required::Slide => ("data.slide", &self.data.slide),
                Required::Annotations => ("data.annotations", &self.data.annotations),
            };
            match path {
                None => problems.push(format!("{name} is not set")),
                Some(p) if !p.exists() => {
                    problems.push(format!("{name} {} does not exist", p.display()))
                }
                Some(_) => {}
            }
        }
        if let Some(p) = &self.features.external_manifest {
            if !p.exists() {
                problems.push(format!(
                    "features.external_manifest {} does not exist",
                    p.display()
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems))
        }
    }
}

/// Inputs a stage needs to exist before it starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Required {
    Slide,
    Annotations,
}
