//! RTTM diarization files.
//!
//! `SPEAKER <file-id> <chan> <tbeg> <tdur> <NA> <NA> <speaker> <NA> <NA>`

use super::json::{format_float, FloatStyle};
use super::SpeakerSegment;
use crate::error::{Error, Result};

/// Parse RTTM text into segments, one per `SPEAKER` line.
///
/// Blank lines, `;` comments and other record types are skipped.
pub fn parse_rttm(input: &str) -> Result<Vec<SpeakerSegment>> {
    let mut segments = Vec::new();
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        if fields.len() < 8 {
            return Err(Error::parse_at(
                line_no,
                1,
                format!("SPEAKER record has {} fields, expected 10", fields.len()),
            ));
        }
        let number = |pos: usize, what: &str| -> Result<f64> {
            let value: f64 = fields[pos].parse().map_err(|_| {
                Error::parse_at(
                    line_no,
                    column_of(raw, pos),
                    format!("{what} {:?} is not a number", fields[pos]),
                )
            })?;
            if !value.is_finite() {
                return Err(Error::parse_at(
                    line_no,
                    column_of(raw, pos),
                    format!("{what} {:?} is not finite", fields[pos]),
                ));
            }
            Ok(value)
        };
        let tbeg = number(3, "tbeg")?;
        let tdur = number(4, "tdur")?;
        if tdur <= 0.0 {
            return Err(Error::validation(format!(
                "line {line_no}: duration {tdur} must be positive"
            )));
        }
        if tbeg < 0.0 {
            return Err(Error::validation(format!(
                "line {line_no}: onset {tbeg} must be non-negative"
            )));
        }
        segments.push(SpeakerSegment {
            start: tbeg,
            end: tbeg + tdur,
            speaker: fields[7].to_string(),
        });
    }
    Ok(segments)
}

fn column_of(line: &str, field: usize) -> usize {
    let mut seen = 0;
    let mut in_field = false;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            in_field = false;
        } else if !in_field {
            if seen == field {
                return i + 1;
            }
            seen += 1;
            in_field = true;
        }
    }
    1
}

/// Write segments as RTTM lines on channel 1.
pub fn write_rttm(segments: &[SpeakerSegment], file_id: &str) -> String {
    let mut out = String::new();
    for seg in segments {
        out.push_str(&format!(
            "SPEAKER {file_id} 1 {} {} <NA> <NA> {} <NA> <NA>\n",
            format_float(seg.start, FloatStyle::Timestamp),
            format_float(seg.end - seg.start, FloatStyle::Timestamp),
            seg.speaker
        ));
    }
    out
}
