//! Utterance-level accuracy (WAR) and F1 scores.

use serde::Serialize;

use super::LabeledInterval;
use crate::align::overlap;
use crate::error::{Error, Result};
use crate::ingest::{EmotionLabel, ReferenceUtterance};
use crate::TIME_EPSILON;

/// A reference emotion and the prediction it was matched to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabelPair {
    pub reference: EmotionLabel,
    pub predicted: Option<EmotionLabel>,
}

/// Pair every reference utterance with the hypothesis interval it overlaps
/// most (ties go to the earlier hypothesis start). References that overlap
/// nothing get `predicted = None`.
pub fn match_labels(reference: &[ReferenceUtterance], hypothesis: &[LabeledInterval]) -> Vec<LabelPair> {
    reference
        .iter()
        .map(|r| {
            let mut best: Option<(f64, f64, EmotionLabel)> = None;
            for h in hypothesis {
                let ov = overlap(r.start, r.end, h.start, h.end);
                if ov <= TIME_EPSILON {
                    continue;
                }
                let wins = match best {
                    None => true,
                    Some((best_ov, best_start, _)) => ov > best_ov || (ov == best_ov && h.start < best_start),
                };
                if wins {
                    best = Some((ov, h.start, h.emotion));
                }
            }
            LabelPair {
                reference: r.emotion,
                predicted: best.map(|(_, _, e)| e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Reference utterances of this class.
    pub support: usize,
    /// Utterances predicted as this class.
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub samples: usize,
    /// Weighted average recall, which equals plain accuracy.
    pub accuracy: f64,
    pub per_class: [ClassMetrics; EmotionLabel::COUNT],
    pub weighted_f1: f64,
    /// Mean F1 over classes that occur as a reference or a prediction.
    pub macro_f1: f64,
    /// `confusion[reference][predicted]`; the last column counts references
    /// with no matched prediction.
    pub confusion: [[usize; EmotionLabel::COUNT + 1]; EmotionLabel::COUNT],
}

impl ClassificationReport {
    pub fn class(&self, label: EmotionLabel) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

pub fn classification_report(pairs: &[LabelPair]) -> Result<ClassificationReport> {
    if pairs.is_empty() {
        return Err(Error::DegenerateInput("no labeled utterances to score".into()));
    }
    let mut confusion = [[0usize; EmotionLabel::COUNT + 1]; EmotionLabel::COUNT];
    for p in pairs {
        let col = p.predicted.map_or(EmotionLabel::COUNT, EmotionLabel::index);
        confusion[p.reference.index()][col] += 1;
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class = EmotionLabel::ALL.map(|label| {
        let k = label.index();
        let tp = confusion[k][k];
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[k]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            label,
            precision,
            recall,
            f1,
            support,
            predicted,
        }
    });

    let correct: usize = (0..EmotionLabel::COUNT).map(|k| confusion[k][k]).sum();
    let n = pairs.len();
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n as f64;
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support + c.predicted > 0).collect();
    let macro_f1 = present.iter().map(|c| c.f1).sum::<f64>() / present.len() as f64;

    Ok(ClassificationReport {
        samples: n,
        accuracy: correct as f64 / n as f64,
        per_class,
        weighted_f1,
        macro_f1,
        confusion,
    })
}
