use crate::error::{Error, Result};

/// Vietnamese IPA initials as emitted by the phonetizer, longest first.
const VIETNAMESE_INITIALS: [&str; 26] = [
    "tʰ", "ɓ", "ɗ", "ʈ", "ʂ", "ʐ", "ɲ", "ŋ", "ɣ", "ʔ", "b", "c", "d", "f", "h", "k", "l", "m",
    "n", "p", "r", "s", "t", "v", "x", "z",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VietnameseSyllable {
    pub segments: String,
    pub tone: u8,
}

/// Separates a phonetized syllable such as `ʔan1` into segments and tone.
///
/// The tone marker is a single trailing digit in the eight-tone scheme
/// (1-6 for open/sonorant-final syllables, 7-8 for checked ones).
pub fn parse_vietnamese_ipa(token: &str) -> Result<VietnameseSyllable> {
    let malformed = |reason| Error::MalformedSyllable {
        token: token.to_string(),
        reason,
    };
    let digits = token.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return Err(malformed("missing tone marker"));
    }
    let split = token.len() - digits;
    let (segments, marker) = token.split_at(split);
    let tone = match marker.parse::<u8>() {
        Ok(t @ 1..=8) => t,
        _ => return Err(malformed("tone marker outside 1-8")),
    };
    if segments.is_empty() {
        return Err(malformed("no segmental material"));
    }
    if segments.chars().any(|c| c.is_whitespace() || c.is_ascii_digit()) {
        return Err(malformed("unexpected character"));
    }
    Ok(VietnameseSyllable {
        segments: segments.to_string(),
        tone,
    })
}

/// Splits IPA segments into (onset, rime); onset may be empty.
pub fn split_vietnamese_onset(segments: &str) -> (&str, &str) {
    let onset = VIETNAMESE_INITIALS
        .iter()
        .filter(|ini| segments.starts_with(*ini) && segments.len() > ini.len())
        .max_by_key(|ini| ini.len())
        .copied()
        .unwrap_or("");
    segments.split_at(onset.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn identity_on_well_formed() {
        let s = parse_vietnamese_ipa("ʔan1").unwrap();
        assert_eq!(s.segments, "ʔan");
        assert_eq!(s.tone, 1);
    }

    #[test]
    fn out_of_range_marker() {
        assert!(parse_vietnamese_ipa("ʔan9").is_err());
        assert!(parse_vietnamese_ipa("ʔan0").is_err());
        assert!(parse_vietnamese_ipa("ʔan33").is_err());
        assert!(parse_vietnamese_ipa("ʔan").is_err());
        assert!(parse_vietnamese_ipa("5").is_err());
    }

    #[test]
    fn onset_split() {
        assert_eq!(split_vietnamese_onset("tʰaːj"), ("tʰ", "aːj"));
        assert_eq!(split_vietnamese_onset("ɗi"), ("ɗ", "i"));
        assert_eq!(split_vietnamese_onset("aːn"), ("", "aːn"));
        assert_eq!(split_vietnamese_onset("ŋ"), ("", "ŋ"));
    }

    // "Hôm nay trời đẹp quá, chúng tôi đi chơi ở công viên và ăn kem ngon lắm
    // nhé bạn" phonetized and tone-counted by hand.
    const SAMPLE: [&str; 20] = [
        "hom1", "naj1", "ʈəːj2", "ɗɛp8", "kwaː5", "cuŋ7", "toj1", "ɗi1", "cəːj1", "ʔəː3",
        "koŋ1", "viən1", "vaː2", "ʔan1", "kɛm1", "ŋɔn1", "lam7", "ɲɛ5", "ɓaːn6", "ʔəː3",
    ];

    #[test]
    fn sample_histogram_matches_hand_count() {
        let mut hist = BTreeMap::new();
        for tok in SAMPLE {
            *hist.entry(parse_vietnamese_ipa(tok).unwrap().tone).or_insert(0usize) += 1;
        }
        let hand: BTreeMap<u8, usize> =
            [(1, 10), (2, 2), (3, 2), (5, 2), (6, 1), (7, 2), (8, 1)]
                .into_iter()
                .collect();
        // tones 1..8 only, counts add up to the sample size
        assert_eq!(hist.values().sum::<usize>(), 20);
        assert_eq!(hist, hand);
    }
}
