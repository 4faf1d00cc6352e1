//! Accuracy, per-class precision/recall/F1, macro-F1 and row-normalized
//! confusion matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<Label>,
    pub samples: usize,
    pub accuracy: f64,
    /// Mean F1 over classes that occur in the truth or the predictions.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `counts[true][predicted]`.
    pub confusion_counts: Vec<Vec<usize>>,
    /// Each row divided by its support; rows without support stay zero.
    pub confusion: Vec<Vec<f64>>,
}

fn index_of(classes: &[Label], label: Label) -> Result<usize> {
    classes
        .iter()
        .position(|c| *c == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

impl Metrics {
    pub fn from_labels(classes: &[Label], truth: &[Label], predicted: &[Label]) -> Result<Metrics> {
        if truth.is_empty() {
            return Err(Error::invalid("data", "no samples to evaluate"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        let c = classes.len();
        let mut counts = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[index_of(classes, t)?][index_of(classes, p)?] += 1;
        }
        let correct: usize = (0..c).map(|i| counts[i][i]).sum();
        let per_class: Vec<ClassMetrics> = (0..c)
            .map(|i| {
                let tp = counts[i][i] as f64;
                let support: usize = counts[i].iter().sum();
                let predicted: usize = counts.iter().map(|row| row[i]).sum();
                let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
                let recall = if support > 0 { tp / support as f64 } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    label: classes[i],
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let present: Vec<f64> = (0..c)
            .filter(|&i| per_class[i].support > 0 || counts.iter().any(|row| row[i] > 0))
            .map(|i| per_class[i].f1)
            .collect();
        let macro_f1 = present.iter().sum::<f64>() / present.len() as f64;
        let confusion = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&n| if total > 0 { n as f64 / total as f64 } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(Metrics {
            classes: classes.to_vec(),
            samples: truth.len(),
            accuracy: correct as f64 / truth.len() as f64,
            macro_f1,
            per_class,
            confusion_counts: counts,
            confusion,
        })
    }

    /// Confusion matrix as CSV: `true_label,<pred_0>,<pred_1>,...`.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true_label");
        for c in &self.classes {
            out.push(',');
            out.push_str(c.as_str());
        }
        out.push('\n');
        for (label, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(label.as_str());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}
