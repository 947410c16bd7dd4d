//! On-disk artifacts passed between stages. Every file name is relative to
//! the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use regionseq::annotation::RegionIssue;
use regionseq::eval::{AggregateReport, EvalReport, SplitPlan};
use regionseq::ScanStrategy;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const REGIONS: &str = "regions.json";
pub const TILES: &str = "tiles.json";
pub const FEATURES: &str = "features.json";
pub const MODEL: &str = "model.json";
pub const HISTORY: &str = "train_history.json";
pub const SPLIT: &str = "split.json";
pub const REPORT: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const CV_REPORT: &str = "cv_report.json";
pub const CV_REPORT_TXT: &str = "cv_report.txt";
pub const CV_HISTORIES: &str = "cv_histories.json";
pub const FLOPS: &str = "flops.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region_id: i64,
    pub label: String,
    /// Position of `label` in the class list; `None` for unknown labels,
    /// which are kept here but not used for training.
    pub label_index: Option<usize>,
    pub area_px: f64,
    pub rotation_deg: f64,
    pub isotropic: bool,
    pub width: usize,
    pub height: usize,
    pub image: String,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRegion {
    pub region_id: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionsManifest {
    pub classes: Vec<String>,
    pub patch_side: usize,
    pub normalized: bool,
    pub regions: Vec<RegionEntry>,
    pub issues: Vec<RegionIssue>,
    pub skipped: Vec<SkippedRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileEntry {
    pub region_id: i64,
    pub label_index: Option<usize>,
    pub image: String,
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of each patch in sequence order.
    pub visits: Vec<(usize, usize)>,
    pub continuity_cost: f64,
    /// Patch files in sequence order, when written.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilesManifest {
    pub classes: Vec<String>,
    pub patch_side: usize,
    pub strategy: ScanStrategy,
    pub regions: Vec<TileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub classes: Vec<String>,
    /// Which part of the dataset was scored: `test` or `all`.
    pub subset: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutput {
    pub classes: Vec<String>,
    pub plan: SplitPlan,
    pub folds: Vec<EvalReport>,
    pub aggregate: AggregateReport,
}

/// Which stage produces each artifact, for error messages.
pub fn producer(file: &str) -> &'static str {
    match file {
        REGIONS => "extract-regions",
        TILES => "tile",
        FEATURES => "extract-features",
        MODEL | HISTORY | SPLIT => "train",
        _ => "run-all",
    }
}

pub fn artifact_path(out: &Path, file: &str) -> PathBuf {
    out.join(file)
}

/// Reads a stage input, pointing at the stage that writes it when missing.
pub fn read_artifact<T: DeserializeOwned>(out: &Path, file: &str) -> CliResult<T> {
    let path = out.join(file);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(missing(&path, producer(file)));
        }
        Err(e) => return Err(CliError::data(format!("{}: {e}", path.display()))),
    };
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn missing(path: &Path, stage: &str) -> CliError {
    CliError::data(format!(
        "{} not found; run `regionseq {stage}` first",
        path.display()
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
