use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiLstmModel, ModelError, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "regionseq-bilstm";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON model container. Floats are written in shortest round-trip form, so
/// save → load reproduces every parameter bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub classes: Vec<String>,
    pub train_config: Option<TrainConfig>,
    pub model: BiLstmModel,
}

impl Checkpoint {
    pub fn new(model: BiLstmModel, seed: u64, train_config: Option<TrainConfig>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed,
            classes: Vec::new(),
            train_config,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let cp: Checkpoint =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                cp.format, cp.version
            )));
        }
        cp.model.config.validate()?;
        let expected = super::model::Params::zeros(&cp.model.config);
        let shapes_match = expected
            .tensors()
            .iter()
            .zip(cp.model.params.tensors())
            .all(|((_, a), (_, b))| a.len() == b.len())
            && expected.tensors().len() == cp.model.params.tensors().len();
        if !shapes_match {
            return Err(ModelError::Checkpoint(
                "parameter shapes do not match the stored config".into(),
            ));
        }
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json())
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilstm::ModelConfig;

    #[test]
    fn json_round_trip_is_exact() {
        let model = BiLstmModel::new(ModelConfig::new(5, 3, 4), 77).unwrap();
        let cp = Checkpoint::new(model, 77, Some(TrainConfig::default()));
        let back = Checkpoint::from_json(&cp.to_json()).unwrap();
        assert_eq!(back, cp);
        assert!(back.model.params.dense_w.is_standard_layout());
    }

    #[test]
    fn wrong_format_rejected() {
        let model = BiLstmModel::new(ModelConfig::new(2, 1, 2), 1).unwrap();
        let mut cp = Checkpoint::new(model, 1, None);
        cp.version = 99;
        assert!(Checkpoint::from_json(&cp.to_json()).is_err());
    }
}
