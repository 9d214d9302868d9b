//! ASCII-case-insensitive scanning helpers shared by the prompt and parse
//! modules. All needles are ASCII, so byte offsets returned here are always
//! valid char boundaries in the UTF-8 haystack.

/// First occurrence of `needle` at or after byte offset `from`.
pub(crate) fn find_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() || from > h.len() - n.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Last occurrence of `needle`.
pub(crate) fn rfind_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// First decimal integer that appears after the given keyword
/// (case-insensitive). Returns `None` on overflow or no digits.
pub(crate) fn first_int_after(haystack: &str, keyword: &str) -> Option<u64> {
    let start = find_ci(haystack, keyword, 0)? + keyword.len();
    let bytes = haystack.as_bytes();
    let mut i = start;
    while i < bytes.len() && !bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == bytes.len() {
        return None;
    }
    let mut value: u64 = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        value = value
            .checked_mul(10)?
            .checked_add(u64::from(bytes[i] - b'0'))?;
        i += 1;
    }
    Some(value)
}
