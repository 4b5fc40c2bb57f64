//! Time-weighted emotion error rates.
//!
//! Per elementary interval of length δ with `|R|` active reference and `|H|`
//! active hypothesis intervals:
//!
//! * missed speech  `δ · max(0, |R| − |H|)`
//! * false alarm    `δ · max(0, |H| − |R|)`
//! * confusion      `δ · (paired intervals that disagree)`
//! * total          `δ · |R|`
//!
//! TEER pairs on emotion alone. sTEER additionally requires the hypothesis
//! speaker to map onto the reference speaker under the session mapping.

use serde::Serialize;

use super::{build_timeline, optimal_speaker_mapping, LabeledInterval, SpeakerMapping, Timeline};
use crate::error::{Error, Result};
use crate::ingest::EmotionLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeerBreakdown {
    pub ms: f64,
    pub fa: f64,
    pub conf: f64,
    pub total: f64,
    pub rate: f64,
}

fn accumulate<F>(timeline: &Timeline, mut confusions: F) -> Result<TeerBreakdown>
where
    F: FnMut(&[usize], &[usize]) -> usize,
{
    let (mut ms, mut fa, mut conf, mut total) = (0.0, 0.0, 0.0, 0.0);
    for slice in &timeline.intervals {
        let delta = slice.duration();
        let (r, h) = (slice.reference.len(), slice.hypothesis.len());
        ms += delta * r.saturating_sub(h) as f64;
        fa += delta * h.saturating_sub(r) as f64;
        total += delta * r as f64;
        if r > 0 && h > 0 {
            conf += delta * confusions(&slice.reference, &slice.hypothesis) as f64;
        }
    }
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "reference contains no speech; the error rate is undefined".into(),
        ));
    }
    Ok(TeerBreakdown {
        ms,
        fa,
        conf,
        total,
        rate: (ms + fa + conf) / total,
    })
}

fn emotion_counts<'a>(stream: &[LabeledInterval], idx: impl Iterator<Item = &'a usize>) -> [usize; EmotionLabel::COUNT] {
    let mut counts = [0; EmotionLabel::COUNT];
    for &i in idx {
        counts[stream[i].emotion.index()] += 1;
    }
    counts
}

/// Time-weighted emotion error rate, speaker-agnostic.
pub fn compute_teer(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> Result<TeerBreakdown> {
    let timeline = build_timeline(reference, hypothesis)?;
    accumulate(&timeline, |r, h| {
        let rc = emotion_counts(reference, r.iter());
        let hc = emotion_counts(hypothesis, h.iter());
        let agree: usize = rc.iter().zip(&hc).map(|(a, b)| a.min(b)).sum();
        r.len().min(h.len()) - agree
    })
}

/// Speaker-attributed TEER using the session's optimal speaker mapping.
pub fn compute_steer(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> Result<TeerBreakdown> {
    let mapping = optimal_speaker_mapping(reference, hypothesis)?;
    compute_steer_with_mapping(reference, hypothesis, &mapping)
}

/// sTEER under a caller-supplied speaker mapping.
pub fn compute_steer_with_mapping(
    reference: &[LabeledInterval],
    hypothesis: &[LabeledInterval],
    mapping: &SpeakerMapping,
) -> Result<TeerBreakdown> {
    let timeline = build_timeline(reference, hypothesis)?;
    accumulate(&timeline, |r, h| {
        // A speaker is active at most once per stream in any slice, and the
        // mapping is injective, so greedy matching finds the maximum.
        let mut used = vec![false; r.len()];
        let mut correct = 0;
        for &hi in h {
            let hyp = &hypothesis[hi];
            let Some(target) = mapping.get(&hyp.speaker) else {
                continue;
            };
            if let Some(k) = r.iter().enumerate().position(|(k, &ri)| {
                !used[k] && reference[ri].speaker == target && reference[ri].emotion == hyp.emotion
            }) {
                used[k] = true;
                correct += 1;
            }
        }
        r.len().min(h.len()) - correct
    })
}
