//! Utterance-list documents: references, hypotheses and turns.
//!
//! `{"utterances":[{"start":num,"end":num,"speaker":str,"emotion":str?,"text":str?}]}`
//!
//! Turn documents additionally carry a `words` list per utterance so that the
//! full word-level attribution survives a round trip.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::json::{to_json_string, FloatStyle};
use super::{EmotionLabel, ReferenceUtterance, Word};
use crate::align::{AttributedWord, Turn, UNATTRIBUTED};
use crate::error::{Error, Result};
use crate::metrics::LabeledInterval;
use crate::TIME_EPSILON;

#[derive(Deserialize)]
struct UtteranceDoc {
    utterances: Vec<RawUtterance>,
}

#[derive(Deserialize)]
struct RawUtterance {
    start: f64,
    end: f64,
    speaker: String,
    #[serde(default)]
    emotion: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    words: Option<Vec<TurnWordRecord>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
struct TurnWordRecord {
    text: String,
    start: f64,
    end: f64,
    #[serde(default)]
    overlap: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    rescued: bool,
}

/// One validated record of an utterance-list document.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
    pub emotion: Option<EmotionLabel>,
    pub text: Option<String>,
    words: Option<Vec<TurnWordRecord>>,
}

#[derive(Serialize)]
struct UtteranceDocOut<'a> {
    utterances: Vec<UtteranceOut<'a>>,
}

#[derive(Serialize)]
struct UtteranceOut<'a> {
    start: f64,
    end: f64,
    speaker: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    emotion: Option<EmotionLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    words: Option<Vec<TurnWordRecord>>,
}

/// Parse an utterance-list document with only the shared checks applied:
/// finite non-negative times, `start ≤ end`, known emotion labels.
pub fn parse_utterances(input: &str) -> Result<Vec<UtteranceRecord>> {
    let doc: UtteranceDoc = serde_json::from_str(input)?;
    doc.utterances
        .into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let ctx = |msg: String| Error::Validation(format!("utterance {i}: {msg}"));
            if !raw.start.is_finite() || !raw.end.is_finite() || raw.start < 0.0 {
                return Err(ctx(format!(
                    "times [{}, {}] must be finite and non-negative",
                    raw.start, raw.end
                )));
            }
            if raw.start > raw.end {
                return Err(ctx(format!("start {} > end {}", raw.start, raw.end)));
            }
            let emotion = match raw.emotion {
                Some(e) => Some(e.parse::<EmotionLabel>().map_err(|err| ctx(err.to_string()))?),
                None => None,
            };
            Ok(UtteranceRecord {
                start: raw.start,
                end: raw.end,
                speaker: raw.speaker,
                emotion,
                text: raw.text,
                words: raw.words,
            })
        })
        .collect()
}

/// Parse a reference annotation document. Every record needs an emotion and
/// a strictly positive duration.
pub fn parse_reference(input: &str) -> Result<Vec<ReferenceUtterance>> {
    parse_utterances(input)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let emotion = rec.emotion.ok_or_else(|| {
                Error::validation(format!("utterance {i}: reference record has no emotion"))
            })?;
            if rec.end - rec.start <= 0.0 {
                return Err(Error::validation(format!(
                    "utterance {i}: zero-duration reference [{}, {}]",
                    rec.start, rec.end
                )));
            }
            Ok(ReferenceUtterance {
                start: rec.start,
                end: rec.end,
                speaker: rec.speaker,
                emotion,
            })
        })
        .collect()
}

/// Parse a hypothesis document (turns with predicted emotions) into labeled
/// intervals. Records without an emotion are a validation error.
pub fn parse_hypothesis(input: &str) -> Result<Vec<LabeledInterval>> {
    parse_utterances(input)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let emotion = rec.emotion.ok_or_else(|| {
                Error::validation(format!(
                    "utterance {i} [{}, {}] {} carries no emotion label",
                    rec.start, rec.end, rec.speaker
                ))
            })?;
            LabeledInterval::new(rec.start, rec.end, rec.speaker, emotion)
                .map_err(|e| Error::validation(format!("utterance {i}: {e}")))
        })
        .collect()
}

pub fn write_reference(refs: &[ReferenceUtterance]) -> Result<String> {
    let mut sorted: Vec<&ReferenceUtterance> = refs.iter().collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let doc = UtteranceDocOut {
        utterances: sorted
            .into_iter()
            .map(|r| {
                if !(r.start.is_finite() && r.end.is_finite() && r.start >= 0.0 && r.start < r.end)
                {
                    return Err(Error::validation(format!(
                        "invalid reference interval [{}, {}]",
                        r.start, r.end
                    )));
                }
                Ok(UtteranceOut {
                    start: r.start,
                    end: r.end,
                    speaker: &r.speaker,
                    emotion: Some(r.emotion),
                    text: None,
                    words: None,
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(to_json_string(&doc, FloatStyle::Timestamp, true))
}

/// Serialize turns, sorted by start time.
///
/// Overlapping turns of the same speaker indicate corrupt upstream state and
/// are rejected.
pub fn write_turns(turns: &[Turn]) -> Result<String> {
    let mut sorted: Vec<&Turn> = turns.iter().collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));

    let mut last_end: HashMap<&str, f64> = HashMap::new();
    for t in &sorted {
        t.validate()?;
        if let Some(&prev_end) = last_end.get(t.speaker.as_str()) {
            if t.start < prev_end - TIME_EPSILON {
                return Err(Error::validation(format!(
                    "turns of speaker {} overlap at {} (previous turn ends at {prev_end})",
                    t.speaker, t.start
                )));
            }
        }
        let entry = last_end.entry(t.speaker.as_str()).or_insert(t.end);
        *entry = entry.max(t.end);
    }

    let doc = UtteranceDocOut {
        utterances: sorted
            .into_iter()
            .map(|t| UtteranceOut {
                start: t.start,
                end: t.end,
                speaker: &t.speaker,
                emotion: t.emotion,
                text: Some(&t.text),
                words: Some(
                    t.words
                        .iter()
                        .map(|w| TurnWordRecord {
                            text: w.word.text.clone(),
                            start: w.word.start,
                            end: w.word.end,
                            overlap: w.overlap,
                            rescued: w.rescued,
                        })
                        .collect(),
                ),
            })
            .collect(),
    };
    Ok(to_json_string(&doc, FloatStyle::Timestamp, true))
}

/// Parse a turn document.
///
/// `text` is required. When a record has no `words` list (hand-written
/// hypothesis files, for instance) the turn is given a single word spanning
/// the whole utterance.
pub fn parse_turns(input: &str) -> Result<Vec<Turn>> {
    parse_utterances(input)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| turn_from_record(rec).map_err(|e| Error::validation(format!("utterance {i}: {e}"))))
        .collect()
}

fn turn_from_record(rec: UtteranceRecord) -> Result<Turn> {
    let text = rec
        .text
        .ok_or_else(|| Error::validation("turn record has no text"))?;
    let speaker_tag = if rec.speaker == UNATTRIBUTED {
        None
    } else {
        Some(rec.speaker.clone())
    };
    let records = match rec.words {
        Some(words) => words,
        None => vec![TurnWordRecord {
            text: text.clone(),
            start: rec.start,
            end: rec.end,
            overlap: 0.0,
            rescued: false,
        }],
    };
    let words = records
        .into_iter()
        .map(|w| {
            let word = Word {
                text: w.text,
                start: w.start,
                end: w.end,
                speaker: speaker_tag.clone(),
            };
            word.validate()?;
            Ok(AttributedWord {
                word,
                speaker: speaker_tag.clone(),
                overlap: w.overlap,
                rescued: w.rescued,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let turn = Turn {
        speaker: rec.speaker,
        words,
        start: rec.start,
        end: rec.end,
        text,
        emotion: rec.emotion,
    };
    turn.validate()?;
    Ok(turn)
}
