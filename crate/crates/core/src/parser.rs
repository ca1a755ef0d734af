//! Parsing of `<think>...</think><answer>...</answer>` model outputs.
//!
//! Answer body grammar (whitespace = ASCII whitespace):
//!
//! ```text
//! body    := ws* (segment (ws+ segment)*)? ws*
//! segment := number ws* '-' ws* number
//! number  := digit+ ('.' digit+)?
//! ```
//!
//! Only the ASCII hyphen separates endpoints. Anything else in the body makes
//! the output malformed.

use serde::{Deserialize, Serialize};

use crate::interval::{SegmentSet, TimeInterval};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

/// Slack added to the timestamp tolerance to absorb decimal round-off.
const TOLERANCE_SLACK: f64 = 1e-9;

/// Which containment the timestamp reward checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampDirection {
    /// Every answer timestamp must appear in the reasoning.
    #[default]
    AnswerInReasoning,
    /// Every reasoning timestamp must appear in the answer.
    ReasoningInAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelOutput {
    pub raw: String,
    pub think: Option<String>,
    pub answer: Option<String>,
    pub answer_segments: Option<SegmentSet>,
    pub answer_timestamps: Vec<f64>,
    pub reasoning_timestamps: Vec<f64>,
    pub well_formed: bool,
}

/// Parses a raw model output. Never fails: malformed text yields
/// `well_formed == false` with whatever could still be extracted.
pub fn parse_output(raw: &str) -> ModelOutput {
    let think = extract_block(raw, THINK_OPEN, THINK_CLOSE);
    let answer = extract_block(raw, ANSWER_OPEN, ANSWER_CLOSE);
    let answer_segments = answer.and_then(parse_answer_body);
    let answer_timestamps = answer_segments
        .as_ref()
        .map(SegmentSet::endpoints)
        .unwrap_or_default();
    let reasoning_timestamps = think.map(scan_timestamps).unwrap_or_default();
    let well_formed = answer_segments.is_some() && has_valid_structure(raw);

    ModelOutput {
        raw: raw.to_owned(),
        think: think.map(str::to_owned),
        answer: answer.map(str::to_owned),
        answer_segments,
        answer_timestamps,
        reasoning_timestamps,
        well_formed,
    }
}

/// Content between the first `open` tag and the next `close` tag.
fn extract_block<'a>(raw: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = raw.find(open)? + open.len();
    let len = raw[start..].find(close)?;
    Some(&raw[start..start + len])
}

/// `ws* <think> T </think> ws* <answer> A </answer> ws*` where neither body
/// contains a tag.
fn has_valid_structure(raw: &str) -> bool {
    let Some(rest) = raw.trim().strip_prefix(THINK_OPEN) else {
        return false;
    };
    let Some((think, rest)) = rest.split_once(THINK_CLOSE) else {
        return false;
    };
    let Some(rest) = rest.trim_start().strip_prefix(ANSWER_OPEN) else {
        return false;
    };
    let Some((answer, rest)) = rest.split_once(ANSWER_CLOSE) else {
        return false;
    };
    let no_tags = |s: &str| !TAGS.iter().any(|t| s.contains(t));
    rest.trim().is_empty() && no_tags(think) && no_tags(answer)
}

/// Parses an answer body into segments, or `None` if it breaks the grammar
/// or contains a reversed interval.
pub fn parse_answer_body(body: &str) -> Option<SegmentSet> {
    let bytes = body.as_bytes();
    let mut pos = skip_ws(bytes, 0);
    let mut out = SegmentSet::empty();
    while pos < bytes.len() {
        if !out.is_empty() {
            // segments are separated by at least one whitespace
            if !bytes[pos - 1].is_ascii_whitespace() {
                return None;
            }
        }
        let (start, p) = read_number(bytes, pos)?;
        pos = skip_ws(bytes, p);
        if bytes.get(pos) != Some(&b'-') {
            return None;
        }
        pos = skip_ws(bytes, pos + 1);
        let (end, p) = read_number(bytes, pos)?;
        out.push(TimeInterval::new(start, end).ok()?);
        pos = skip_ws(bytes, p);
    }
    Some(out)
}

fn skip_ws(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

/// Reads `digit+ ('.' digit+)?` at `pos`; returns the value and the end.
fn read_number(bytes: &[u8], pos: usize) -> Option<(f64, usize)> {
    let end = literal_end(bytes, pos)?;
    // ASCII digits and '.' only, so this slice is valid UTF-8
    let text = std::str::from_utf8(&bytes[pos..end]).ok()?;
    Some((text.parse().ok()?, end))
}

fn literal_end(bytes: &[u8], pos: usize) -> Option<usize> {
    let digits = |mut p: usize| {
        while p < bytes.len() && bytes[p].is_ascii_digit() {
            p += 1;
        }
        p
    };
    let int_end = digits(pos);
    if int_end == pos {
        return None;
    }
    if bytes.get(int_end) == Some(&b'.') {
        let frac_end = digits(int_end + 1);
        if frac_end > int_end + 1 {
            return Some(frac_end);
        }
    }
    Some(int_end)
}

/// Decimal literals in free text, skipping any literal that touches an
/// alphabetic character on either side (`mp4`, `x264`, `3rd`).
pub fn scan_timestamps(text: &str) -> Vec<f64> {
    let bytes = text.as_bytes();
    let is_alpha_at = |i: usize| {
        text.get(i..)
            .and_then(|s| s.chars().next())
            .is_some_and(char::is_alphabetic)
    };
    let is_alpha_before = |i: usize| {
        text[..i]
            .chars()
            .next_back()
            .is_some_and(char::is_alphabetic)
    };

    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if !bytes[pos].is_ascii_digit() || (pos > 0 && bytes[pos - 1].is_ascii_digit()) {
            pos += 1;
            continue;
        }
        let end = literal_end(bytes, pos).unwrap_or(pos + 1);
        if !is_alpha_before(pos) && !is_alpha_at(end) {
            if let Some(v) = std::str::from_utf8(&bytes[pos..end])
                .ok()
                .and_then(|t| t.parse().ok())
            {
                out.push(v);
            }
        }
        pos = end;
    }
    out
}

/// 1 for a well-formed output, else 0.
pub fn format_reward(o: &ModelOutput) -> f64 {
    if o.well_formed {
        1.0
    } else {
        0.0
    }
}

/// 1 when every timestamp on the checked side has a partner on the other side
/// within `tolerance` seconds; 0 otherwise or when the output is malformed.
pub fn timestamp_reward(o: &ModelOutput, tolerance: f64, direction: TimestampDirection) -> f64 {
    if !o.well_formed {
        return 0.0;
    }
    let (needles, haystack) = match direction {
        TimestampDirection::AnswerInReasoning => (&o.answer_timestamps, &o.reasoning_timestamps),
        TimestampDirection::ReasoningInAnswer => (&o.reasoning_timestamps, &o.answer_timestamps),
    };
    let found = needles.iter().all(|t| {
        haystack
            .iter()
            .any(|s| (t - s).abs() <= tolerance + TOLERANCE_SLACK)
    });
    if found {
        1.0
    } else {
        0.0
    }
}

/// Renders segments as space-separated `X.XX-X.XX` tokens in list order.
pub fn serialize_answer(s: &SegmentSet) -> String {
    s.iter()
        .map(|iv| format!("{:.2}-{:.2}", iv.start(), iv.end()))
        .collect::<Vec<_>>()
        .join(" ")
}
