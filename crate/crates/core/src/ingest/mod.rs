//! Parsers and writers for every external file format.
//!
//! All documents except RTTM are JSON. Unknown fields in input records are
//! ignored. Parsers report the location of the first malformed record and
//! never drop records silently.

mod embedding;
mod json;
mod rttm;
mod utterances;
mod words;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use embedding::{parse_embedding, parse_embedding_str, write_embedding, EmbeddingMatrix};
pub use json::{to_json_string, FloatStyle};
pub use rttm::{parse_rttm, write_rttm};
pub use utterances::{
    parse_hypothesis, parse_reference, parse_turns, parse_utterances, write_reference,
    write_turns, UtteranceRecord,
};
pub use words::{parse_words, write_words};

/// One transcribed token.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub text: String,
    pub start: f64,
    pub end: f64,
    pub speaker: Option<String>,
}

impl Word {
    pub fn new(text: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        let word = Word {
            text: text.into(),
            start,
            end,
            speaker: None,
        };
        word.validate()?;
        Ok(word)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::validation("word text is empty"));
        }
        if self.text.contains('\n') {
            return Err(Error::validation(format!(
                "word text {:?} contains a newline",
                self.text
            )));
        }
        check_time(self.start, "start")?;
        check_time(self.end, "end")?;
        if self.start > self.end {
            return Err(Error::validation(format!(
                "word {:?}: start {} > end {}",
                self.text, self.start, self.end
            )));
        }
        Ok(())
    }
}

/// A diarization interval attributed to one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerSegment {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

impl SpeakerSegment {
    pub fn new(start: f64, end: f64, speaker: impl Into<String>) -> Result<Self> {
        check_time(start, "start")?;
        check_time(end, "end")?;
        let speaker = speaker.into();
        if start >= end {
            return Err(Error::validation(format!(
                "segment for {speaker}: start {start} must be < end {end}"
            )));
        }
        Ok(SpeakerSegment {
            start,
            end,
            speaker,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A reference annotation: who spoke when, and with which emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUtterance {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
    pub emotion: EmotionLabel,
}

/// The closed four-class emotion set.
///
/// The declaration order is the class index order used by the classifier
/// and by confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Happy,
    Sad,
    Angry,
    Neutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 4] = [
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Angry,
        EmotionLabel::Neutral,
    ];

    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "happy" => Ok(EmotionLabel::Happy),
            "sad" => Ok(EmotionLabel::Sad),
            "angry" => Ok(EmotionLabel::Angry),
            "neutral" => Ok(EmotionLabel::Neutral),
            _ => Err(Error::validation(format!(
                "unknown emotion label {s:?} (expected happy, sad, angry or neutral)"
            ))),
        }
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

fn check_time(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::validation(format!(
            "{what} time {value} must be finite and non-negative"
        )));
    }
    Ok(())
}
