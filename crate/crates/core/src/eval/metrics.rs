use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    class_count: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut counts = vec![vec![0u64; class_count]; class_count];
    for (&p, &t) in predictions.iter().zip(labels) {
        if p >= class_count || t >= class_count {
            return Err(EvalError::ClassOutOfRange {
                class: p.max(t),
                class_count,
            });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        self.row_sum(class) - self.true_positives(class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        self.col_sum(class) - self.true_positives(class)
    }

    pub fn true_negatives(&self, class: usize) -> u64 {
        self.total() - self.row_sum(class) - self.false_positives(class)
    }

    /// `trace / total`; `None` for an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        let trace: u64 = (0..self.class_count()).map(|c| self.counts[c][c]).sum();
        (total > 0).then(|| trace as f64 / total as f64)
    }

    /// `TP / (TP + FN)`, one-vs-rest; `None` when the class never occurs.
    pub fn sensitivity(&self, class: usize) -> Option<f64> {
        let tp = self.true_positives(class);
        let denom = tp + self.false_negatives(class);
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// `TN / (TN + FP)`, one-vs-rest; `None` when every sample is `class`.
    pub fn specificity(&self, class: usize) -> Option<f64> {
        let tn = self.true_negatives(class);
        let denom = tn + self.false_positives(class);
        (denom > 0).then(|| tn as f64 / denom as f64)
    }
}

/// Metrics of one evaluation (one fold or one held-out test set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fold: Option<usize>,
    pub samples: u64,
    /// `null` in JSON marks an undefined metric.
    pub accuracy: Option<f64>,
    pub sensitivity: Vec<Option<f64>>,
    pub specificity: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix, fold: Option<usize>) -> Self {
        let c = confusion.class_count();
        Self {
            fold,
            samples: confusion.total(),
            accuracy: confusion.accuracy(),
            sensitivity: (0..c).map(|k| confusion.sensitivity(k)).collect(),
            specificity: (0..c).map(|k| confusion.specificity(k)).collect(),
            confusion,
        }
    }
}

/// Mean and standard error (`sample std / √n`) over the folds where the
/// metric was defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let vals: Vec<f64> = values.into_iter().flatten().collect();
        let n = vals.len();
        if n == 0 {
            return Self {
                mean: None,
                std_error: None,
                n,
            };
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std_error = (n > 1).then(|| {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            std_error,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub folds: usize,
    pub accuracy: MeanSe,
    pub sensitivity: Vec<MeanSe>,
    pub specificity: Vec<MeanSe>,
}

impl AggregateReport {
    pub fn from_folds(reports: &[EvalReport]) -> Self {
        let c = reports.first().map_or(0, |r| r.sensitivity.len());
        Self {
            folds: reports.len(),
            accuracy: MeanSe::of(reports.iter().map(|r| r.accuracy)),
            sensitivity: (0..c)
                .map(|k| MeanSe::of(reports.iter().map(|r| r.sensitivity[k])))
                .collect(),
            specificity: (0..c)
                .map(|k| MeanSe::of(reports.iter().map(|r| r.specificity[k])))
                .collect(),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.2}", 100.0 * x))
}

fn cell_se(m: &MeanSe) -> String {
    match (m.mean, m.std_error) {
        (Some(mean), Some(se)) => format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * se),
        (Some(mean), None) => format!("{:.2}", 100.0 * mean),
        _ => "n/a".to_string(),
    }
}

/// Plain-text table with per-class Se./Sp. (percent) and accuracy.
pub fn render_report_table(report: &EvalReport, classes: &[String]) -> String {
    let mut out = String::new();
    let name_w = classes.iter().map(String::len).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:<name_w$}  {:>10}  {:>10}", "Class", "Se. (%)", "Sp. (%)");
    for (k, (se, sp)) in report.sensitivity.iter().zip(&report.specificity).enumerate() {
        let name = classes.get(k).cloned().unwrap_or_else(|| k.to_string());
        let _ = writeln!(out, "{:<name_w$}  {:>10}  {:>10}", name, cell(*se), cell(*sp));
    }
    let _ = writeln!(out, "Accuracy (%): {}  (n = {})", cell(report.accuracy), report.samples);
    out
}

/// Aggregate table, values as `mean ± standard error` in percent.
pub fn render_aggregate_table(agg: &AggregateReport, classes: &[String]) -> String {
    let mut out = String::new();
    let name_w = classes.iter().map(String::len).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:<name_w$}  {:>16}  {:>16}", "Class", "Se. (%)", "Sp. (%)");
    for (k, (se, sp)) in agg.sensitivity.iter().zip(&agg.specificity).enumerate() {
        let name = classes.get(k).cloned().unwrap_or_else(|| k.to_string());
        let _ = writeln!(out, "{:<name_w$}  {:>16}  {:>16}", name, cell_se(se), cell_se(sp));
    }
    let _ = writeln!(out, "Accuracy (%): {}  ({} folds)", cell_se(&agg.accuracy), agg.folds);
    out
}
