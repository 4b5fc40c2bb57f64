use serde::{Deserialize, Serialize};

use super::json::{to_json_string, FloatStyle};
use super::Word;
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct WordDoc {
    segments: Vec<SegmentRecord>,
}

#[derive(Deserialize)]
struct SegmentRecord {
    words: Vec<WordRecord>,
}

#[derive(Deserialize, Serialize)]
struct WordRecord {
    text: String,
    start: f64,
    end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
}

#[derive(Serialize)]
struct WordDocOut<'a> {
    segments: [SegmentOut<'a>; 1],
}

#[derive(Serialize)]
struct SegmentOut<'a> {
    words: Vec<WordRef<'a>>,
}

#[derive(Serialize)]
struct WordRef<'a> {
    text: &'a str,
    start: f64,
    end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    speaker: Option<&'a str>,
}

/// Parse a word-transcript document.
///
/// Words are returned in file order, segment by segment. Surrounding
/// whitespace in word text is trimmed.
pub fn parse_words(input: &str) -> Result<Vec<Word>> {
    let doc: WordDoc = serde_json::from_str(input)?;
    let mut words = Vec::new();
    for (si, segment) in doc.segments.into_iter().enumerate() {
        for (wi, record) in segment.words.into_iter().enumerate() {
            let word = Word {
                text: record.text.trim().to_string(),
                start: record.start,
                end: record.end,
                speaker: record.speaker,
            };
            word.validate().map_err(|e| match e {
                Error::Validation(msg) => {
                    Error::Validation(format!("segment {si}, word {wi}: {msg}"))
                }
                other => other,
            })?;
            words.push(word);
        }
    }
    Ok(words)
}

/// Write words as a single-segment transcript document.
pub fn write_words(words: &[Word]) -> Result<String> {
    for (i, w) in words.iter().enumerate() {
        w.validate()
            .map_err(|e| Error::validation(format!("word {i}: {e}")))?;
    }
    let doc = WordDocOut {
        segments: [SegmentOut {
            words: words
                .iter()
                .map(|w| WordRef {
                    text: &w.text,
                    start: w.start,
                    end: w.end,
                    speaker: w.speaker.as_deref(),
                })
                .collect(),
        }],
    };
    Ok(to_json_string(&doc, FloatStyle::Timestamp, true))
}
