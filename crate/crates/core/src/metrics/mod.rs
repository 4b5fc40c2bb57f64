//! Duration-weighted emotion error rates and utterance-level classification
//! metrics.
//!
//! TEER and sTEER share one substrate: the [`Timeline`] of elementary
//! intervals between consecutive boundary points of both streams, each
//! carrying the reference and hypothesis intervals active inside it.

mod classification;
mod mapping;
mod teer;
mod timeline;

use crate::error::{Error, Result};
use crate::ingest::{EmotionLabel, ReferenceUtterance};

pub use classification::{classification_report, match_labels, ClassMetrics, ClassificationReport, LabelPair};
pub use mapping::{optimal_speaker_mapping, solve_max_assignment, SpeakerMapping};
pub use teer::{compute_steer, compute_steer_with_mapping, compute_teer, TeerBreakdown};
pub use timeline::{build_timeline, ElementaryInterval, Timeline};

/// A speaker-attributed, emotion-labeled time interval of either stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInterval {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
    pub emotion: EmotionLabel,
}

impl LabeledInterval {
    pub fn new(start: f64, end: f64, speaker: impl Into<String>, emotion: EmotionLabel) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start >= end {
            return Err(Error::validation(format!(
                "labeled interval [{start}, {end}] must have start < end"
            )));
        }
        Ok(LabeledInterval {
            start,
            end,
            speaker: speaker.into(),
            emotion,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

impl From<ReferenceUtterance> for LabeledInterval {
    fn from(r: ReferenceUtterance) -> Self {
        LabeledInterval {
            start: r.start,
            end: r.end,
            speaker: r.speaker,
            emotion: r.emotion,
        }
    }
}

impl From<&ReferenceUtterance> for LabeledInterval {
    fn from(r: &ReferenceUtterance) -> Self {
        r.clone().into()
    }
}
