//! String helpers shared by the conversion, decoding and scoring stages.
//!
//! Offsets returned here are byte offsets into the original string unless a
//! function name says otherwise.

/// Single-character case fold. Characters whose lowercase form expands to
/// several characters are left as they are, so folded text always has the
/// same number of characters as its source.
pub fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Byte ranges of every case-insensitive occurrence of `needle` in
/// `haystack`, overlapping matches included, in ascending order.
pub fn find_folded(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let pattern: Vec<char> = needle.chars().map(fold_char).collect();
    if pattern.is_empty() {
        return Vec::new();
    }
    let hay: Vec<(usize, char)> = haystack
        .char_indices()
        .map(|(i, c)| (i, fold_char(c)))
        .collect();
    if hay.len() < pattern.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for start in 0..=hay.len() - pattern.len() {
        if hay[start..start + pattern.len()]
            .iter()
            .zip(&pattern)
            .all(|((_, h), p)| h == p)
        {
            let end_idx = start + pattern.len();
            let end = hay.get(end_idx).map_or(haystack.len(), |(i, _)| *i);
            out.push((hay[start].0, end));
        }
    }
    out
}

/// Byte ranges of every exact (case-sensitive) occurrence, overlapping
/// matches included.
pub fn find_exact(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    if needle.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        out.push((start, start + needle.len()));
        // advance by one character to allow overlaps
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
        if from > haystack.len() {
            break;
        }
    }
    out
}

pub fn byte_to_char(s: &str, byte: usize) -> usize {
    s[..byte].chars().count()
}

/// Byte offset of the `ch`-th character; `ch == len` maps to `s.len()`.
pub fn char_to_byte(s: &str, ch: usize) -> Option<usize> {
    if ch == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (i, _) in s.char_indices() {
        if count == ch {
            return Some(i);
        }
        count += 1;
    }
    (count == ch).then_some(s.len())
}

/// Substring by character offsets.
pub fn char_slice(s: &str, start: usize, len: usize) -> Option<&str> {
    let b0 = char_to_byte(s, start)?;
    let b1 = b0 + char_to_byte(&s[b0..], len)?;
    Some(&s[b0..b1])
}

/// Collapses whitespace runs to one ASCII space and trims both ends.
/// Returns the collapsed text together with, for every byte of the output,
/// the byte offset in `s` it came from (plus a final entry for the end).
pub fn collapse_whitespace_mapped(s: &str) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(s.len());
    let mut map = Vec::with_capacity(s.len() + 1);
    let mut pending_space: Option<usize> = None;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if !out.is_empty() && pending_space.is_none() {
                pending_space = Some(i);
            }
            continue;
        }
        if let Some(sp) = pending_space.take() {
            out.push(' ');
            map.push(sp);
        }
        let start = out.len();
        out.push(c);
        for k in 0..(out.len() - start) {
            map.push(i + k);
        }
    }
    let end = map
        .last()
        .map_or(0, |&last| last + s[last..].chars().next().map_or(0, char::len_utf8));
    map.push(end);
    (out, map)
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Key under which answer texts are considered duplicates when merging:
/// case-folded with whitespace collapsed.
pub fn dedup_key(s: &str) -> String {
    collapse_whitespace(s).chars().map(fold_char).collect()
}

/// Key used when comparing a prediction against gold answers: the dedup key
/// with surrounding punctuation removed.
pub fn match_key(s: &str) -> String {
    let key = dedup_key(s);
    key.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}
