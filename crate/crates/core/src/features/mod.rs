//! Patch feature extraction and region feature sequences.

mod manifest;
mod toy;

pub use manifest::{
    load_feature_manifest, load_feature_set, write_feature_manifest, FeatureManifest, FeatureSet,
    LabelRef, ManifestEntry,
};
pub use toy::ToyExtractor;

use image::RgbImage;
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scan::Patch;

/// One region as a `D × m` matrix; column `t` is the feature of the t-th
/// scanned patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub features: Array2<f64>,
    pub label: usize,
    pub region_id: String,
}

impl FeatureSequence {
    pub fn new(features: Array2<f64>, label: usize, region_id: impl Into<String>) -> Self {
        Self {
            features,
            label,
            region_id: region_id.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Number of patches.
    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.ncols() == 0
    }

    pub fn column(&self, t: usize) -> ArrayView1<'_, f64> {
        self.features.column(t)
    }

    /// Same columns in reverse order.
    pub fn reversed(&self) -> Self {
        let mut features = self.features.clone();
        features.invert_axis(ndarray::Axis(1));
        Self {
            features: features.as_standard_layout().to_owned(),
            label: self.label,
            region_id: self.region_id.clone(),
        }
    }
}

/// Maps a patch to a fixed-length feature vector. Implementations must be
/// deterministic.
pub trait FeatureExtractor: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn extract(&self, patch: &RgbImage) -> Vec<f64>;
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no patches to build a sequence from")]
    NoPatches,
    #[error("extractor {name} declared dimension {declared} but produced {produced}")]
    ExtractorDimension {
        name: String,
        declared: usize,
        produced: usize,
    },
    #[error("region {region}: feature dimension {found} differs from dataset dimension {expected}")]
    InconsistentDim {
        region: String,
        expected: usize,
        found: usize,
    },
    #[error("region {region}: manifest says m = {declared} but the file has {found} columns")]
    LengthMismatch {
        region: String,
        declared: usize,
        found: usize,
    },
    #[error("region {region}: non-finite value at ({row},{col})")]
    NonFinite {
        region: String,
        row: usize,
        col: usize,
    },
    #[error("region {region}: unparseable value {value:?} at ({row},{col})")]
    BadValue {
        region: String,
        row: usize,
        col: usize,
        value: String,
    },
    #[error("region {region}: label {label} is not in the class list")]
    UnknownLabel { region: String, label: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// Runs the extractor over patches in scan order and stacks the vectors as
/// columns. The whole sequence carries the region's label.
pub fn build_sequence(
    patches: &[Patch],
    extractor: &dyn FeatureExtractor,
    label: usize,
    region_id: impl Into<String>,
) -> Result<FeatureSequence, FeatureError> {
    if patches.is_empty() {
        return Err(FeatureError::NoPatches);
    }
    let dim = extractor.dim();
    let columns: Vec<Vec<f64>> = patches
        .par_iter()
        .map(|p| extractor.extract(&p.pixels))
        .collect();
    let mut features = Array2::zeros((dim, columns.len()));
    for (t, col) in columns.iter().enumerate() {
        if col.len() != dim {
            return Err(FeatureError::ExtractorDimension {
                name: extractor.name().to_string(),
                declared: dim,
                produced: col.len(),
            });
        }
        for (d, v) in col.iter().enumerate() {
            features[[d, t]] = *v;
        }
    }
    Ok(FeatureSequence::new(features, label, region_id))
}
