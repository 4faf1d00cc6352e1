//! Signal-level diagnosis: classify every segment of a signal and take the
//! majority vote.
//!
//! Ties are resolved toward a fault (a false alarm is cheaper than a missed
//! fault), and among tied faults toward the lowest class index. `tie_flag`
//! records that a tie occurred.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::model::{predict, Metrics, TrainedModel};
use crate::signal::{decibel_spectra, NormalizationMode, RawSignal, SegmentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVote {
    pub segment: usize,
    pub channel: usize,
    pub label: Label,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteReport {
    pub source_id: String,
    pub class_order: Vec<Label>,
    pub segment_predictions: Vec<SegmentVote>,
    pub vote_counts: BTreeMap<Label, usize>,
    pub verdict: Label,
    pub tie_flag: bool,
    /// Votes for the verdict divided by the number of votes.
    pub confidence: f64,
    /// Segments whose spectra fell outside the stored normalization range.
    #[serde(default)]
    pub out_of_range_segments: usize,
}

impl VoteReport {
    /// Aggregate per-segment predictions by majority vote.
    pub fn from_votes(source_id: impl Into<String>, class_order: &[Label], votes: Vec<SegmentVote>) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::invalid("segment_predictions", "no segment predictions to vote on"));
        }
        let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
        for v in &votes {
            if !class_order.contains(&v.label) {
                return Err(Error::UnknownLabel(v.label.to_string()));
            }
            *counts.entry(v.label).or_insert(0) += 1;
        }
        let max = *counts.values().max().expect("nonempty");
        let tied: Vec<Label> = class_order
            .iter()
            .copied()
            .filter(|l| counts.get(l) == Some(&max))
            .collect();
        let verdict = tied
            .iter()
            .copied()
            .find(|l| !l.is_normal())
            .unwrap_or(tied[0]);
        Ok(VoteReport {
            source_id: source_id.into(),
            class_order: class_order.to_vec(),
            confidence: max as f64 / votes.len() as f64,
            tie_flag: tied.len() > 1,
            verdict,
            vote_counts: counts,
            segment_predictions: votes,
            out_of_range_segments: 0,
        })
    }
}

/// Segment, transform, normalize and classify a signal, then vote.
///
/// Every channel of every segment casts one vote.
pub fn diagnose_signal(
    signal: &RawSignal,
    model: &TrainedModel,
    seg_cfg: &SegmentConfig,
    norm_mode: NormalizationMode,
) -> Result<VoteReport> {
    if model.normalization.mode != norm_mode {
        return Err(Error::NormalizationMismatch {
            model: model.normalization.mode.name(),
            requested: norm_mode.name(),
        });
    }
    seg_cfg.validate()?;
    if seg_cfg.bin_count() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: seg_cfg.bin_count(),
        });
    }
    let spectra = decibel_spectra(signal, seg_cfg, model.db_epsilon)?;
    let mut votes = Vec::new();
    let mut out_of_range = 0;
    for (segment, db) in spectra.iter().enumerate() {
        let mut flagged = false;
        for (channel, single) in db.clone().into_channels().into_iter().enumerate() {
            let ctx = model.normalization.for_channel(channel)?;
            let (normalized, oor) = ctx.apply(&single)?;
            flagged |= oor;
            let p = predict(model, &normalized)?;
            votes.push(SegmentVote {
                segment,
                channel,
                label: p.label,
                probabilities: p.probabilities,
            });
        }
        out_of_range += usize::from(flagged);
    }
    let mut report = VoteReport::from_votes(signal.source_id(), &model.class_order, votes)?;
    report.out_of_range_segments = out_of_range;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalOutcome {
    pub source_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<VoteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub outcomes: Vec<SignalOutcome>,
    /// Every segment vote scored against its signal's label.
    pub segment_metrics: Option<Metrics>,
    /// Majority-vote verdicts scored against the signal labels.
    pub signal_metrics: Option<Metrics>,
}

impl BatchReport {
    /// Score the labeled, successfully diagnosed outcomes.
    pub fn from_outcomes(outcomes: Vec<SignalOutcome>, class_order: &[Label]) -> Result<Self> {
        let mut seg_truth = Vec::new();
        let mut seg_pred = Vec::new();
        let mut sig_truth = Vec::new();
        let mut sig_pred = Vec::new();
        for o in &outcomes {
            if let (Some(truth), Some(report)) = (o.truth, &o.report) {
                for v in &report.segment_predictions {
                    seg_truth.push(truth);
                    seg_pred.push(v.label);
                }
                sig_truth.push(truth);
                sig_pred.push(report.verdict);
            }
        }
        let (segment_metrics, signal_metrics) = if sig_truth.is_empty() {
            (None, None)
        } else {
            (
                Some(Metrics::from_labels(class_order, &seg_truth, &seg_pred)?),
                Some(Metrics::from_labels(class_order, &sig_truth, &sig_pred)?),
            )
        };
        Ok(BatchReport {
            outcomes,
            segment_metrics,
            signal_metrics,
        })
    }

    /// One line per signal: source, truth, verdict, confidence, tie, votes per class, error.
    pub fn summary_csv(&self, class_order: &[Label]) -> String {
        let mut out = String::from("source,truth,verdict,confidence,tie,segments");
        for c in class_order {
            out.push_str(&format!(",votes_{c}"));
        }
        out.push_str(",error\n");
        for o in &self.outcomes {
            let truth = o.truth.map(|t| t.to_string()).unwrap_or_default();
            match &o.report {
                Some(r) => {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}",
                        o.source_id,
                        truth,
                        r.verdict,
                        r.confidence,
                        r.tie_flag,
                        r.segment_predictions.len()
                    ));
                    for c in class_order {
                        out.push_str(&format!(",{}", r.vote_counts.get(c).copied().unwrap_or(0)));
                    }
                    out.push_str(",\n");
                }
                None => {
                    out.push_str(&format!("{},{},,,,", o.source_id, truth));
                    for _ in class_order {
                        out.push(',');
                    }
                    let err = o.error.clone().unwrap_or_default().replace(['"', '\n'], " ");
                    out.push_str(&format!(",\"{err}\"\n"));
                }
            }
        }
        out
    }
}

/// Diagnose a batch. Per-signal failures are recorded, not propagated.
/// Ground-truth labels are mapped into the model's label space (faults become
/// `Anomalous` for a binary model).
pub fn batch_diagnose(
    signals: &[(RawSignal, Option<Label>)],
    model: &TrainedModel,
    seg_cfg: &SegmentConfig,
    norm_mode: NormalizationMode,
) -> Result<BatchReport> {
    if signals.is_empty() {
        return Err(Error::invalid("signals", "no signals to diagnose"));
    }
    let binary = model.class_order.contains(&Label::Anomalous);
    let outcomes = signals
        .iter()
        .map(|(signal, truth)| {
            let truth = truth.map(|t| match (binary, t) {
                (true, Label::Fault(_)) => Label::Anomalous,
                _ => t,
            });
            let (report, error) = match diagnose_signal(signal, model, seg_cfg, norm_mode) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SignalOutcome {
                source_id: signal.source_id().to_string(),
                truth,
                report,
                error,
            }
        })
        .collect();
    BatchReport::from_outcomes(outcomes, &model.class_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcsa::FaultType;

    const RBD: Label = Label::Fault(FaultType::RotorBarDefect);
    const ITSC: Label = Label::Fault(FaultType::InterTurnShortCircuit);
    const CLASSES: [Label; 3] = [Label::Normal, ITSC, RBD];

    fn votes(labels: &[Label]) -> Vec<SegmentVote> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &label)| SegmentVote {
                segment: i,
                channel: 0,
                label,
                probabilities: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn clear_majority() {
        let r = VoteReport::from_votes(
            "s",
            &CLASSES,
            votes(&[Label::Normal, Label::Normal, RBD, Label::Normal, Label::Normal]),
        )
        .unwrap();
        assert_eq!(r.verdict, Label::Normal);
        assert_eq!(r.confidence, 0.8);
        assert!(!r.tie_flag);
    }

    #[test]
    fn tie_goes_to_fault() {
        let r = VoteReport::from_votes("s", &CLASSES, votes(&[Label::Normal, Label::Normal, ITSC, ITSC])).unwrap();
        assert_eq!(r.verdict, ITSC);
        assert!(r.tie_flag);
        assert_eq!(r.vote_counts[&Label::Normal], 2);
        let r = VoteReport::from_votes("s", &CLASSES, votes(&[RBD, ITSC])).unwrap();
        assert_eq!(r.verdict, ITSC);
    }

    #[test]
    fn unanimous() {
        let r = VoteReport::from_votes("s", &CLASSES, votes(&[RBD; 6])).unwrap();
        assert_eq!((r.verdict, r.confidence, r.tie_flag), (RBD, 1.0, false));
    }

    #[test]
    fn rejects_empty_and_unknown() {
        assert!(VoteReport::from_votes("s", &CLASSES, Vec::new()).is_err());
        assert!(VoteReport::from_votes("s", &CLASSES, votes(&[Label::Anomalous])).is_err());
    }

    #[test]
    fn voting_lifts_accuracy_over_segments() {
        // Each signal: 5 segments, one wrong (segment accuracy 0.8).
        let mut outcomes = Vec::new();
        for (i, truth) in [Label::Normal, ITSC, RBD, Label::Normal].into_iter().enumerate() {
            let wrong = if truth == Label::Normal { RBD } else { Label::Normal };
            let mut labels = vec![truth; 5];
            labels[i % 5] = wrong;
            outcomes.push(SignalOutcome {
                source_id: format!("s{i}"),
                truth: Some(truth),
                report: Some(VoteReport::from_votes(format!("s{i}"), &CLASSES, votes(&labels)).unwrap()),
                error: None,
            });
        }
        let batch = BatchReport::from_outcomes(outcomes, &CLASSES).unwrap();
        assert_eq!(batch.segment_metrics.as_ref().unwrap().accuracy, 0.8);
        assert_eq!(batch.signal_metrics.as_ref().unwrap().accuracy, 1.0);
        let csv = batch.summary_csv(&CLASSES);
        assert!(csv.starts_with("source,truth,verdict,confidence,tie,segments,votes_Normal"));
        assert_eq!(csv.lines().count(), 5);
    }
}
