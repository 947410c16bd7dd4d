use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureSequence};

/// Class label as either an index or a name resolved through `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: LabelRef,
    pub m: usize,
    /// CSV path, relative to the manifest's directory.
    pub file: String,
}

/// JSON index of a feature dataset. Each entry points at a CSV with D rows
/// and m columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<String>,
    /// Free-form note on how patches were prepared before extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    pub regions: Vec<ManifestEntry>,
}

/// Sequences plus the manifest they were loaded from.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub manifest: FeatureManifest,
    pub sequences: Vec<FeatureSequence>,
}

impl FeatureSet {
    pub fn class_count(&self) -> usize {
        if self.manifest.classes.is_empty() {
            self.sequences.iter().map(|s| s.label + 1).max().unwrap_or(0)
        } else {
            self.manifest.classes.len()
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FeatureError + '_ {
    move |source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn resolve_label(entry: &ManifestEntry, classes: &[String]) -> Result<usize, FeatureError> {
    match &entry.label {
        LabelRef::Index(i) if classes.is_empty() || *i < classes.len() => Ok(*i),
        LabelRef::Index(i) => Err(FeatureError::UnknownLabel {
            region: entry.id.clone(),
            label: i.to_string(),
        }),
        LabelRef::Name(name) => classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| FeatureError::UnknownLabel {
                region: entry.id.clone(),
                label: name.clone(),
            }),
    }
}

fn read_matrix(path: &Path, region: &str) -> Result<Array2<f64>, FeatureError> {
    let csv_err = |source| FeatureError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut values = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| FeatureError::BadValue {
                region: region.to_string(),
                row,
                col,
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FeatureError::NonFinite {
                    region: region.to_string(),
                    row,
                    col,
                });
            }
            values.push(v);
        }
        rows.push(values);
    }
    let d = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    // csv rejects ragged rows by default, so the shape is consistent here.
    Ok(Array2::from_shape_vec((d, m), flat).expect("rectangular csv"))
}

/// Reads a manifest and every matrix it references.
pub fn load_feature_set(path: &Path) -> Result<FeatureSet, FeatureError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: FeatureManifest =
        serde_json::from_str(&text).map_err(|source| FeatureError::Json {
            path: path.display().to_string(),
            source,
        })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut sequences = Vec::with_capacity(manifest.regions.len());
    for entry in &manifest.regions {
        let label = resolve_label(entry, &manifest.classes)?;
        let features = read_matrix(&base.join(&entry.file), &entry.id)?;
        if features.nrows() != manifest.dim {
            return Err(FeatureError::InconsistentDim {
                region: entry.id.clone(),
                expected: manifest.dim,
                found: features.nrows(),
            });
        }
        if features.ncols() != entry.m {
            return Err(FeatureError::LengthMismatch {
                region: entry.id.clone(),
                declared: entry.m,
                found: features.ncols(),
            });
        }
        sequences.push(FeatureSequence::new(features, label, entry.id.clone()));
    }
    Ok(FeatureSet {
        manifest,
        sequences,
    })
}

pub fn load_feature_manifest(path: &Path) -> Result<Vec<FeatureSequence>, FeatureError> {
    load_feature_set(path).map(|set| set.sequences)
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes one CSV per sequence (9 significant digits) next to a JSON
/// manifest at `manifest_path`. `template` supplies the metadata fields;
/// its `dim` and `regions` are replaced.
pub fn write_feature_manifest(
    manifest_path: &Path,
    sequences: &[FeatureSequence],
    template: &FeatureManifest,
) -> Result<FeatureManifest, FeatureError> {
    let dir: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let data_dir = dir.join("features");
    fs::create_dir_all(&data_dir).map_err(io_err(&data_dir))?;

    let dim = sequences.first().map_or(template.dim, FeatureSequence::dim);
    let mut regions = Vec::with_capacity(sequences.len());
    for (k, seq) in sequences.iter().enumerate() {
        if seq.dim() != dim {
            return Err(FeatureError::InconsistentDim {
                region: seq.region_id.clone(),
                expected: dim,
                found: seq.dim(),
            });
        }
        let file = format!("features/{:04}_{}.csv", k, file_stem_for(&seq.region_id));
        let mut text = String::new();
        for row in seq.features.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        let csv_path = dir.join(&file);
        fs::write(&csv_path, text).map_err(io_err(&csv_path))?;
        regions.push(ManifestEntry {
            id: seq.region_id.clone(),
            label: LabelRef::Index(seq.label),
            m: seq.len(),
            file,
        });
    }
    let manifest = FeatureManifest {
        dim,
        regions,
        ..template.clone()
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| FeatureError::Json {
        path: manifest_path.display().to_string(),
        source,
    })?;
    fs::write(manifest_path, json + "\n").map_err(io_err(manifest_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(dir: &Path, name: &str, rows: usize, cols: usize, f: impl Fn(usize, usize) -> String) {
        let mut text = String::new();
        for r in 0..rows {
            let line: Vec<String> = (0..cols).map(|c| f(r, c)).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        fs::write(dir.join(name), text).unwrap();
    }

    #[test]
    fn two_regions_of_dim_1024() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "a.csv", 1024, 48, |r, c| format!("{}", (r + c) as f64 * 0.001));
        write_csv(dir.path(), "b.csv", 1024, 20, |r, c| format!("{}", (r * c) as f64));
        let manifest = r#"{ "dim": 1024, "classes": ["Benign", "InSitu", "Invasive"], "regions": [
            { "id": "a", "label": "Invasive", "m": 48, "file": "a.csv" },
            { "id": "b", "label": 0, "m": 20, "file": "b.csv" } ] }"#;
        fs::write(dir.path().join("m.json"), manifest).unwrap();
        let seqs = load_feature_manifest(&dir.path().join("m.json")).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!((seqs[0].dim(), seqs[0].len(), seqs[0].label), (1024, 48, 2));
        assert_eq!((seqs[1].dim(), seqs[1].len(), seqs[1].label), (1024, 20, 0));
    }

    #[test]
    fn empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.json"), r#"{"dim": 96, "regions": []}"#).unwrap();
        assert!(load_feature_manifest(&dir.path().join("m.json")).unwrap().is_empty());
    }

    #[test]
    fn nan_is_located() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "r.csv", 6, 8, |r, c| if (r, c) == (3, 5) { "NaN".into() } else { "0.5".into() });
        fs::write(
            dir.path().join("m.json"),
            r#"{"dim": 6, "regions": [{"id": "r7", "label": 0, "m": 8, "file": "r.csv"}]}"#,
        )
        .unwrap();
        match load_feature_manifest(&dir.path().join("m.json")) {
            Err(FeatureError::NonFinite { region, row, col }) => {
                assert_eq!((region.as_str(), row, col), ("r7", 3, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "a.csv", 4, 2, |_, _| "1".into());
        write_csv(dir.path(), "b.csv", 5, 2, |_, _| "1".into());
        fs::write(
            dir.path().join("m.json"),
            r#"{"dim": 4, "regions": [
                {"id": "a", "label": 0, "m": 2, "file": "a.csv"},
                {"id": "b", "label": 1, "m": 2, "file": "b.csv"}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_feature_manifest(&dir.path().join("m.json")),
            Err(FeatureError::InconsistentDim { found: 5, .. })
        ));
    }

    #[test]
    fn declared_length_checked() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "a.csv", 2, 3, |_, _| "1".into());
        fs::write(
            dir.path().join("m.json"),
            r#"{"dim": 2, "regions": [{"id": "a", "label": 0, "m": 4, "file": "a.csv"}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_feature_manifest(&dir.path().join("m.json")),
            Err(FeatureError::LengthMismatch { declared: 4, found: 3, .. })
        ));
    }
}
