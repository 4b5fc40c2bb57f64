use std::collections::{BTreeMap, BTreeSet};

use super::LabeledInterval;
use crate::error::{Error, Result};
use crate::TIME_EPSILON;

/// A maximal slice of time during which the active sets do not change.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryInterval {
    pub start: f64,
    pub end: f64,
    /// Indices into the reference stream, ascending.
    pub reference: Vec<usize>,
    /// Indices into the hypothesis stream, ascending.
    pub hypothesis: Vec<usize>,
}

impl ElementaryInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    /// Ordered, non-overlapping. Slices where neither stream is active are
    /// omitted.
    pub intervals: Vec<ElementaryInterval>,
}

fn check_stream(stream: &[LabeledInterval], name: &str) -> Result<()> {
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, iv) in stream.iter().enumerate() {
        if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start >= iv.end {
            return Err(Error::validation(format!(
                "{name} interval {i} [{}, {}] must have start < end",
                iv.start, iv.end
            )));
        }
        by_speaker.entry(iv.speaker.as_str()).or_default().push(i);
    }
    for (speaker, mut idx) in by_speaker {
        idx.sort_by(|&a, &b| stream[a].start.total_cmp(&stream[b].start));
        for pair in idx.windows(2) {
            let (a, b) = (&stream[pair[0]], &stream[pair[1]]);
            if b.start < a.end - TIME_EPSILON {
                return Err(Error::validation(format!(
                    "{name} intervals {} [{}, {}] and {} [{}, {}] of speaker {speaker} overlap",
                    pair[0], a.start, a.end, pair[1], b.start, b.end
                )));
            }
        }
    }
    Ok(())
}

/// Partition the span of both streams into elementary intervals.
///
/// Within one stream a speaker may not overlap itself; different speakers may.
pub fn build_timeline(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> Result<Timeline> {
    check_stream(reference, "reference")?;
    check_stream(hypothesis, "hypothesis")?;

    // (time, is_start, stream, index); ends sort before starts at equal times.
    let mut events: Vec<(f64, bool, u8, usize)> = Vec::with_capacity(2 * (reference.len() + hypothesis.len()));
    for (stream_id, stream) in [(0u8, reference), (1u8, hypothesis)] {
        for (i, iv) in stream.iter().enumerate() {
            events.push((iv.start, true, stream_id, i));
            events.push((iv.end, false, stream_id, i));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut active: [BTreeSet<usize>; 2] = [BTreeSet::new(), BTreeSet::new()];
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            let (_, is_start, stream_id, idx) = events[i];
            if is_start {
                active[stream_id as usize].insert(idx);
            } else {
                active[stream_id as usize].remove(&idx);
            }
            i += 1;
        }
        let Some(&(next, ..)) = events.get(i) else {
            break;
        };
        if active[0].is_empty() && active[1].is_empty() {
            continue;
        }
        intervals.push(ElementaryInterval {
            start: t,
            end: next,
            reference: active[0].iter().copied().collect(),
            hypothesis: active[1].iter().copied().collect(),
        });
    }
    Ok(Timeline { intervals })
}
