use crate::error::{Error, Result};

/// The 21 Mandarin initials. Digraphs come first so they win over their
/// single-letter prefixes.
pub const MANDARIN_INITIALS: [&str; 21] = [
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s",
];

/// Syllabic nasals carry no vowel letter and have no onset.
const SYLLABIC_NASALS: [&str; 5] = ["m", "n", "ng", "hm", "hng"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinyinSyllable {
    /// Toneless base, e.g. `hao`.
    pub base: String,
    /// Citation tone as written, 1-5.
    pub tone: u8,
    pub onset: String,
    pub rime: String,
}

/// Splits a numbered Pinyin token such as `zhong1`.
pub fn parse_pinyin(token: &str) -> Result<PinyinSyllable> {
    let malformed = |reason| Error::MalformedSyllable {
        token: token.to_string(),
        reason,
    };

    let mut chars = token.chars();
    let last = chars.next_back().ok_or_else(|| malformed("empty token"))?;
    let tone = match last.to_digit(10) {
        Some(d @ 1..=5) => d as u8,
        Some(_) => return Err(malformed("tone digit outside 1-5")),
        None => return Err(malformed("missing trailing tone digit")),
    };
    let base = chars.as_str();
    if base.is_empty() {
        return Err(malformed("no segmental material"));
    }
    if !base.chars().all(|c| c.is_ascii_lowercase() || c == 'ü') {
        return Err(malformed("unexpected character"));
    }

    let has_vowel = base
        .chars()
        .any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'v' | 'ü'));
    let onset = if has_vowel {
        MANDARIN_INITIALS
            .iter()
            .find(|ini| base.starts_with(*ini))
            .copied()
            .unwrap_or("")
    } else if SYLLABIC_NASALS.contains(&base) {
        ""
    } else {
        return Err(malformed("no vowel"));
    };
    let rime = &base[onset.len()..];
    if rime.is_empty() {
        return Err(malformed("empty rime"));
    }

    Ok(PinyinSyllable {
        base: base.to_string(),
        tone,
        onset: onset.to_string(),
        rime: rime.to_string(),
    })
}
