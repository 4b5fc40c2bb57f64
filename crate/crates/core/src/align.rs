//! Word-to-speaker attribution and turn construction.
//!
//! The pipeline has three stages, each exposed on its own:
//!
//! 1. [`attribute_words`]: every word takes the speaker of the diarization
//!    segment it overlaps most. Words that overlap nothing may be rescued by
//!    the nearest segment within [`AlignConfig::rescue_window`].
//! 2. [`flatten_stream`]: all words are merged into one chronological stream,
//!    discarding whatever segment structure the transcript had.
//! 3. [`group_turns`]: a greedy pass merges consecutive words while the
//!    speaker stays the same and the pause stays within
//!    [`AlignConfig::pause_threshold`].
//!
//! [`align`] runs all three.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ingest::{EmotionLabel, SpeakerSegment, Word};
use crate::TIME_EPSILON;

/// Speaker label given to turns built from unattributed words when
/// [`AlignConfig::drop_unattributed`] is off.
pub const UNATTRIBUTED: &str = "<unattributed>";

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    /// Longest pause, in seconds, allowed between two words of one turn.
    pub pause_threshold: f64,
    /// Largest distance, in seconds, at which a word that overlaps no segment
    /// is still given the nearest segment's speaker.
    pub rescue_window: f64,
    pub drop_unattributed: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            pause_threshold: 1.5,
            rescue_window: 0.5,
            drop_unattributed: true,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pause_threshold.is_nan() || self.pause_threshold <= 0.0 {
            return Err(Error::Precondition(format!(
                "pause threshold must be > 0, got {}",
                self.pause_threshold
            )));
        }
        if self.rescue_window.is_nan() || self.rescue_window < 0.0 {
            return Err(Error::Precondition(format!(
                "rescue window must be >= 0, got {}",
                self.rescue_window
            )));
        }
        Ok(())
    }
}

/// A word together with its speaker decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedWord {
    pub word: Word,
    /// `None` when no segment overlapped and none was close enough to rescue.
    pub speaker: Option<String>,
    /// Seconds of overlap with the chosen segment; zero for rescued words.
    pub overlap: f64,
    pub rescued: bool,
}

impl AttributedWord {
    fn speaker_label(&self) -> &str {
        self.speaker.as_deref().unwrap_or(UNATTRIBUTED)
    }
}

/// A speaker-attributed run of words.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub speaker: String,
    pub words: Vec<AttributedWord>,
    pub start: f64,
    pub end: f64,
    pub text: String,
    /// Predicted or annotated emotion; alignment leaves this empty.
    pub emotion: Option<EmotionLabel>,
}

impl Turn {
    /// Build a turn from a non-empty run of words sharing one speaker.
    pub fn from_words(words: Vec<AttributedWord>) -> Result<Turn> {
        let (first, last) = match (words.first(), words.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::Precondition("a turn needs at least one word".into())),
        };
        let speaker = first.speaker_label().to_string();
        if let Some(w) = words.iter().find(|w| w.speaker_label() != speaker) {
            return Err(Error::Precondition(format!(
                "word {:?} has speaker {} in a turn of {speaker}",
                w.word.text,
                w.speaker_label()
            )));
        }
        let start = first.word.start;
        let end = last.word.end;
        let text = join_text(&words);
        Ok(Turn {
            speaker,
            words,
            start,
            end,
            text,
            emotion: None,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (first, last) = match (self.words.first(), self.words.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::validation("turn has no words")),
        };
        if (self.start - first.word.start).abs() > TIME_EPSILON
            || (self.end - last.word.end).abs() > TIME_EPSILON
        {
            return Err(Error::validation(format!(
                "turn [{}, {}] does not match its words [{}, {}]",
                self.start, self.end, first.word.start, last.word.end
            )));
        }
        if self.start > self.end {
            return Err(Error::validation(format!(
                "turn start {} > end {}",
                self.start, self.end
            )));
        }
        if let Some(w) = self.words.iter().find(|w| w.speaker_label() != self.speaker) {
            return Err(Error::validation(format!(
                "word {:?} is attributed to {} inside a turn of {}",
                w.word.text,
                w.speaker_label(),
                self.speaker
            )));
        }
        if self.text != join_text(&self.words) {
            return Err(Error::validation(format!(
                "turn text {:?} is not the join of its words",
                self.text
            )));
        }
        Ok(())
    }
}

fn join_text(words: &[AttributedWord]) -> String {
    words
        .iter()
        .map(|w| w.word.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Length of the intersection of `[a0, a1]` and `[b0, b1]`, zero if disjoint.
pub fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Distance between two intervals, zero if they touch or overlap.
fn gap_between(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (b0 - a1).max(a0 - b1).max(0.0)
}

/// Candidate ordering: larger `score` first, then earlier segment start,
/// then smaller speaker id, then input position.
fn better(score: f64, seg: &SpeakerSegment, idx: usize, best: Option<(f64, &SpeakerSegment, usize)>, larger_wins: bool) -> bool {
    let Some((best_score, best_seg, best_idx)) = best else {
        return true;
    };
    let by_score = if larger_wins {
        score.total_cmp(&best_score)
    } else {
        best_score.total_cmp(&score)
    };
    match by_score {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => seg
            .start
            .total_cmp(&best_seg.start)
            .then_with(|| seg.speaker.cmp(&best_seg.speaker))
            .then(idx.cmp(&best_idx))
            == Ordering::Less,
    }
}

/// Assign every word to a speaker by maximal temporal overlap.
///
/// Overlaps of at most [`TIME_EPSILON`] count as zero. Any `speaker` already
/// present on the input words is overwritten.
pub fn attribute_words(
    words: &[Word],
    segments: &[SpeakerSegment],
    config: &AlignConfig,
) -> Vec<AttributedWord> {
    // Segments sorted by start, with a running maximum of end times so the
    // backwards scan for overlapping candidates can stop early.
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| segments[a].start.total_cmp(&segments[b].start).then(a.cmp(&b)));
    let mut max_end = Vec::with_capacity(order.len());
    let mut running = f64::NEG_INFINITY;
    for &i in &order {
        running = running.max(segments[i].end);
        max_end.push(running);
    }

    words
        .iter()
        .map(|word| {
            let upper = order.partition_point(|&i| segments[i].start < word.end);
            let mut best: Option<(f64, &SpeakerSegment, usize)> = None;
            for pos in (0..upper).rev() {
                if max_end[pos] <= word.start {
                    break;
                }
                let idx = order[pos];
                let seg = &segments[idx];
                let ov = overlap(word.start, word.end, seg.start, seg.end);
                if ov > TIME_EPSILON && better(ov, seg, idx, best, true) {
                    best = Some((ov, seg, idx));
                }
            }
            if let Some((ov, seg, _)) = best {
                return attributed(word, Some(seg.speaker.clone()), ov, false);
            }

            let mut nearest: Option<(f64, &SpeakerSegment, usize)> = None;
            for (idx, seg) in segments.iter().enumerate() {
                let gap = gap_between(word.start, word.end, seg.start, seg.end);
                if better(gap, seg, idx, nearest, false) {
                    nearest = Some((gap, seg, idx));
                }
            }
            match nearest {
                Some((gap, seg, _)) if gap <= config.rescue_window + TIME_EPSILON => {
                    attributed(word, Some(seg.speaker.clone()), 0.0, true)
                }
                _ => attributed(word, None, 0.0, false),
            }
        })
        .collect()
}

fn attributed(word: &Word, speaker: Option<String>, overlap: f64, rescued: bool) -> AttributedWord {
    let mut word = word.clone();
    word.speaker = speaker.clone();
    AttributedWord {
        word,
        speaker,
        overlap,
        rescued,
    }
}

/// Merge words into one chronological stream.
///
/// Stable sort on `(start, end)`; unattributed words are removed when the
/// config says so.
pub fn flatten_stream(attributed: Vec<AttributedWord>, config: &AlignConfig) -> Vec<AttributedWord> {
    let mut stream: Vec<AttributedWord> = attributed
        .into_iter()
        .filter(|w| !(config.drop_unattributed && w.speaker.is_none()))
        .collect();
    stream.sort_by(|a, b| {
        a.word
            .start
            .total_cmp(&b.word.start)
            .then(a.word.end.total_cmp(&b.word.end))
    });
    stream
}

/// Greedy left-to-right grouping into turns.
///
/// A word extends the current turn when it has the same speaker and starts
/// no more than `pause_threshold` after the previous word ends. Overlapping
/// words (negative gap) never split a turn.
pub fn group_turns(stream: Vec<AttributedWord>, config: &AlignConfig) -> Result<Vec<Turn>> {
    config.validate()?;
    if let Some(i) = stream
        .windows(2)
        .position(|pair| pair[1].word.start < pair[0].word.start)
    {
        return Err(Error::Precondition(format!(
            "word stream is not sorted: word {} starts at {} after word {} at {}",
            i + 1,
            stream[i + 1].word.start,
            i,
            stream[i].word.start
        )));
    }

    let mut turns = Vec::new();
    let mut current: Vec<AttributedWord> = Vec::new();
    for word in stream {
        if let Some(last) = current.last() {
            let gap = (word.word.start - last.word.end).max(0.0);
            let same_speaker = word.speaker == last.speaker;
            if !same_speaker || gap > config.pause_threshold + TIME_EPSILON {
                turns.push(Turn::from_words(std::mem::take(&mut current))?);
            }
        }
        current.push(word);
    }
    if !current.is_empty() {
        turns.push(Turn::from_words(current)?);
    }
    Ok(turns)
}

/// Full alignment: attribute, flatten, group.
pub fn align(words: &[Word], segments: &[SpeakerSegment], config: &AlignConfig) -> Result<Vec<Turn>> {
    config.validate()?;
    let attributed = attribute_words(words, segments, config);
    let stream = flatten_stream(attributed, config);
    group_turns(stream, config)
}

/// Count of words that [`align`] would drop as unattributed.
pub fn count_unattributed(attributed: &[AttributedWord]) -> usize {
    attributed.iter().filter(|w| w.speaker.is_none()).count()
}
