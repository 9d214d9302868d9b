//! Extraction of the final answer (and optional planning draft) from a raw
//! model response.
//!
//! Vanilla-family responses are the final answer: the whole text, trimmed.
//! Thinking-family responses are searched in a fixed priority order, and the
//! rule that fired is recorded so analysts can filter by it:
//!
//! 1. text between `<final_answer>` and `</final_answer>` — `TagPair`
//! 2. an unclosed `<final_answer>`: everything after the opening tag
//!    (`Marker` with the `unclosed_tag` flag set, so the attempt is salvaged
//!    rather than discarded)
//! 3. text after the last `Final <n>-word document:` marker — `Marker`
//! 4. text after the last `</thinking>` — `AfterThinking`
//! 5. the whole text — `WholeText`
//!
//! Tag matching is ASCII-case-insensitive. Whatever the path, scaffold tags
//! are scrubbed from the returned text, so extraction output never contains
//! `<thinking>` or `<final_answer>` markers.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::text::{find_ci, rfind_ci};

pub const THINKING_OPEN: &str = "<thinking>";
pub const THINKING_CLOSE: &str = "</thinking>";
pub const FINAL_OPEN: &str = "<final_answer>";
pub const FINAL_CLOSE: &str = "</final_answer>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("response is empty")]
    EmptyResponse,
    #[error("response has a thinking block but no extractable final text")]
    ThinkingOnly,
}

/// Which extraction rule produced the final text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMethod {
    TagPair,
    Marker,
    AfterThinking,
    WholeText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub final_text: String,
    pub thinking_text: Option<String>,
    pub method: ParseMethod,
    /// An opening `<final_answer>` had no matching close; the text after the
    /// opening tag was salvaged.
    pub unclosed_tag: bool,
}

/// Extract the final answer from `raw` according to the variant family.
pub fn extract_final(
    raw: &str,
    family: crate::prompt::PromptFamily,
) -> Result<ParsedResponse, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }

    let thinking_text = find_ci(raw, THINKING_OPEN, 0).and_then(|open| {
        let start = open + THINKING_OPEN.len();
        let end = find_ci(raw, THINKING_CLOSE, start)?;
        let body = raw[start..end].trim();
        (!body.is_empty()).then(|| body.to_string())
    });

    let (candidate, method, unclosed_tag) = match family {
        crate::prompt::PromptFamily::Vanilla => (raw, ParseMethod::WholeText, false),
        crate::prompt::PromptFamily::Thinking => thinking_extract(raw),
    };

    let final_text = scrub_tags(candidate);
    let final_text = final_text.trim();
    if final_text.is_empty() {
        return Err(ParseError::ThinkingOnly);
    }

    Ok(ParsedResponse {
        final_text: final_text.to_string(),
        thinking_text,
        method,
        unclosed_tag,
    })
}

fn thinking_extract(raw: &str) -> (&str, ParseMethod, bool) {
    if let Some(open) = find_ci(raw, FINAL_OPEN, 0) {
        let start = open + FINAL_OPEN.len();
        return match find_ci(raw, FINAL_CLOSE, start) {
            Some(close) => (&raw[start..close], ParseMethod::TagPair, false),
            None => (&raw[start..], ParseMethod::Marker, true),
        };
    }
    if let Some(end) = last_marker_end(raw) {
        return (&raw[end..], ParseMethod::Marker, false);
    }
    if let Some(close) = rfind_ci(raw, THINKING_CLOSE) {
        return (
            &raw[close + THINKING_CLOSE.len()..],
            ParseMethod::AfterThinking,
            false,
        );
    }
    (raw, ParseMethod::WholeText, false)
}

/// Remove echoed template scaffolding from an extracted answer: any line
/// consisting solely of `[EXACTLY <n> WORDS TOTAL]` is dropped, and the
/// result is trimmed. All other content is preserved byte for byte.
pub fn strip_scaffold(final_text: &str) -> String {
    let mut out = String::with_capacity(final_text.len());
    let mut first = true;
    for line in final_text.lines() {
        if is_scaffold_line(line) {
            continue;
        }
        if !first {
            out.push('\n');
        }
        out.push_str(line);
        first = false;
    }
    out.trim().to_string()
}

/// Matches `[EXACTLY <digits> WORDS TOTAL]` with arbitrary surrounding
/// whitespace, case-insensitively.
fn is_scaffold_line(line: &str) -> bool {
    let s = line.trim();
    let Some(inner) = s.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
        return false;
    };
    let mut parts = inner.split_whitespace();
    let (Some(a), Some(b), Some(c), Some(d), None) = (
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
    ) else {
        return false;
    };
    a.eq_ignore_ascii_case("exactly")
        && !b.is_empty()
        && b.bytes().all(|ch| ch.is_ascii_digit())
        && c.eq_ignore_ascii_case("words")
        && d.eq_ignore_ascii_case("total")
}

/// Remove every occurrence of the scaffold tag literals, repeating until the
/// text is clean so removals cannot splice new tags together.
fn scrub_tags(text: &str) -> String {
    let mut out = text.to_string();
    loop {
        let mut changed = false;
        for tag in [FINAL_OPEN, FINAL_CLOSE, THINKING_OPEN, THINKING_CLOSE] {
            while let Some(at) = find_ci(&out, tag, 0) {
                out.replace_range(at..at + tag.len(), "");
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Byte offset just past the last `Final <n>-word document:` marker.
fn last_marker_end(raw: &str) -> Option<usize> {
    let bytes = raw.as_bytes();
    let mut result = None;
    let mut from = 0;
    while let Some(at) = find_ci(raw, "final", from) {
        if let Some(end) = match_marker(bytes, at + "final".len()) {
            result = Some(end);
        }
        from = at + 1;
    }
    result
}

/// After "final" at `i`, expect: whitespace+, digits+, "-word", whitespace+,
/// "document", optional whitespace, ":". Returns the offset past the colon.
fn match_marker(bytes: &[u8], mut i: usize) -> Option<usize> {
    let mut saw_ws = false;
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
        saw_ws = true;
    }
    if !saw_ws {
        return None;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    i = expect_ci(bytes, i, b"-word")?;
    let ws_start = i;
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if i == ws_start {
        return None;
    }
    i = expect_ci(bytes, i, b"document")?;
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    (i < bytes.len() && bytes[i] == b':').then(|| i + 1)
}

fn expect_ci(bytes: &[u8], i: usize, literal: &[u8]) -> Option<usize> {
    if i + literal.len() <= bytes.len() && bytes[i..i + literal.len()].eq_ignore_ascii_case(literal)
    {
        Some(i + literal.len())
    } else {
        None
    }
}
