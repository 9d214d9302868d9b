//! Deterministic, Treebank-style word counting.
//!
//! Tokenization rules:
//! - tokens split on whitespace; leading/trailing punctuation detaches
//! - clitics split off the end of a word: 's, n't, 're, 've, 'll, 'd, 'm
//!   ("Amazon's" -> "Amazon", "'s"; "don't" -> "do", "n't")
//! - internal hyphens are kept ("long-term" is one token), as are internal
//!   periods ("U.S.A") and digit-group commas ("1,000")
//! - currency and percent signs detach from digits ("$575" -> "$", "575")
//! - double-quote marks (straight, curly, guillemets, `` '') normalize to
//!   paired quote tokens `` and ''
//! - ellipsis runs ("...", "…") and dash runs ("--", "—") are standalone
//!   tokens
//!
//! A token is countable iff it contains at least one letter or digit, or is
//! one of the paired quote tokens. The quote-token rule mirrors the
//! reference counter this module is calibrated against (see the golden-set
//! tests): multi-character quote tokens fall outside the ASCII punctuation
//! set that reference implementations exclude, so quoted text contributes
//! two extra countable tokens. Bare punctuation, including ellipses and
//! dashes, never counts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Version tag persisted alongside every count so stored records can be
/// audited against the rules that produced them.
pub const RULES_VERSION: &str = "treebank-lite/1";

/// Normalized opening-quote token.
pub const OPENING_QUOTE: &str = "``";
/// Normalized closing-quote token.
pub const CLOSING_QUOTE: &str = "''";

const CLITIC_SUFFIXES: [&str; 6] = ["'s", "'re", "'ve", "'ll", "'d", "'m"];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}' // right single quotation mark
}

fn is_dash(c: char) -> bool {
    c == '\u{2013}' || c == '\u{2014}' // en dash, em dash
}

/// Number of countable words in `text`.
pub fn count_words(text: &str) -> usize {
    tokenize(text).iter().filter(|t| is_countable(t)).count()
}

/// Whether a token produced by [`tokenize`] counts as a word.
pub fn is_countable(token: &str) -> bool {
    token == OPENING_QUOTE || token == CLOSING_QUOTE || token.chars().any(char::is_alphanumeric)
}

/// Split `text` into tokens. Empty input yields an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }

        // Directional double quotes.
        if matches!(c, '\u{201C}' | '\u{201E}' | '\u{00AB}') {
            tokens.push(OPENING_QUOTE.to_string());
            i += 1;
            continue;
        }
        if matches!(c, '\u{201D}' | '\u{00BB}') {
            tokens.push(CLOSING_QUOTE.to_string());
            i += 1;
            continue;
        }
        // Straight double quote: opening after start-of-text, whitespace, or
        // an opening bracket; closing otherwise.
        if c == '"' {
            let opening = i == 0
                || chars[i - 1].is_whitespace()
                || matches!(chars[i - 1], '(' | '[' | '{' | '<');
            tokens.push(
                if opening {
                    OPENING_QUOTE
                } else {
                    CLOSING_QUOTE
                }
                .to_string(),
            );
            i += 1;
            continue;
        }
        // Backtick runs: a pair is an opening quote, a lone backtick is
        // ordinary punctuation.
        if c == '`' {
            let mut j = i;
            while j < chars.len() && chars[j] == '`' {
                j += 1;
            }
            if j - i >= 2 {
                tokens.push(OPENING_QUOTE.to_string());
            } else {
                tokens.push("`".to_string());
            }
            i = j;
            continue;
        }
        // Apostrophe runs of two or more form a closing quote.
        if is_apostrophe(c) && i + 1 < chars.len() && is_apostrophe(chars[i + 1]) {
            let mut j = i;
            while j < chars.len() && is_apostrophe(chars[j]) {
                j += 1;
            }
            tokens.push(CLOSING_QUOTE.to_string());
            i = j;
            continue;
        }

        if c.is_alphanumeric() {
            i = scan_word(&chars, i, &mut tokens);
            continue;
        }

        // Ellipsis and dash runs are single tokens.
        if c == '.' && i + 1 < chars.len() && chars[i + 1] == '.' {
            let mut j = i;
            while j < chars.len() && chars[j] == '.' {
                j += 1;
            }
            tokens.push(chars[i..j].iter().collect());
            i = j;
            continue;
        }
        if (c == '-' && i + 1 < chars.len() && chars[i + 1] == '-') || is_dash(c) {
            let mut j = i;
            while j < chars.len() && (chars[j] == '-' || is_dash(chars[j])) {
                j += 1;
            }
            tokens.push(chars[i..j].iter().collect());
            i = j;
            continue;
        }

        // Anything else is a single punctuation token ($, %, commas, ...).
        tokens.push(c.to_string());
        i += 1;
    }

    tokens
}

/// Scan one word token starting at an alphanumeric char, apply clitic
/// splitting, push the result, and return the index after the token.
fn scan_word(chars: &[char], start: usize, tokens: &mut Vec<String>) -> usize {
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            i += 1;
            continue;
        }
        let next_is_word = i + 1 < chars.len() && chars[i + 1].is_alphanumeric();
        let joined = match c {
            '-' | '.' => next_is_word && !is_dash_run(chars, i),
            ',' => {
                chars[i - 1].is_ascii_digit()
                    && i + 1 < chars.len()
                    && chars[i + 1].is_ascii_digit()
            }
            _ if is_apostrophe(c) => chars[i - 1].is_alphanumeric() && next_is_word,
            _ => false,
        };
        if !joined {
            break;
        }
        i += 1;
    }

    let mut word = String::with_capacity(i - start);
    for &c in &chars[start..i] {
        // Normalize curly apostrophes so clitic splitting sees one form.
        word.push(if c == '\u{2019}' { '\'' } else { c });
    }

    match split_clitic(&word) {
        Some(cut) => {
            tokens.push(word[..cut].to_string());
            tokens.push(word[cut..].to_string());
        }
        None => tokens.push(word),
    }
    i
}

fn is_dash_run(chars: &[char], i: usize) -> bool {
    chars[i] == '-' && i + 1 < chars.len() && chars[i + 1] == '-'
}

/// Byte offset at which to split a trailing clitic, if any. The suffixes are
/// ASCII, so the returned offset is always a char boundary.
fn split_clitic(word: &str) -> Option<usize> {
    let bytes = word.as_bytes();
    let n = bytes.len();
    let ends_with = |suffix: &str| {
        n > suffix.len() && bytes[n - suffix.len()..].eq_ignore_ascii_case(suffix.as_bytes())
    };
    if ends_with("n't") {
        return Some(n - 3);
    }
    CLITIC_SUFFIXES
        .iter()
        .find(|suffix| ends_with(suffix))
        .map(|suffix| n - suffix.len())
}
