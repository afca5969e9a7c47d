//! Praat interval-tier TextGrids and tabular (TSV) alignments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentFormat {
    TextGrid,
    Tsv,
}

impl AlignmentFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "textgrid" => Some(AlignmentFormat::TextGrid),
            "tsv" | "txt" => Some(AlignmentFormat::Tsv),
            _ => None,
        }
    }
}

/// Aligner tokens that mark non-speech.
pub fn is_silence_label(label: &str) -> bool {
    let l = label.trim();
    l.is_empty()
        || matches!(
            l.to_ascii_lowercase().as_str(),
            "sil" | "sp" | "<eps>" | "spn" | "<sil>" | "<unk>"
        )
}

/// Tier names tried, in order, when no tier is requested explicitly.
const PREFERRED_TIERS: [&str; 7] = [
    "characters",
    "chars",
    "syllables",
    "syllable",
    "words",
    "word",
    "phrases",
];

#[derive(Debug, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Exists,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        s.push('"');
                    }
                    Some('"') | None => break,
                    Some(ch) => s.push(ch),
                }
            }
            out.push(Token::Str(s));
        } else if c.is_whitespace() {
            chars.next();
        } else {
            let mut word = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '"' {
                    break;
                }
                word.push(ch);
                chars.next();
            }
            if word == "<exists>" {
                out.push(Token::Exists);
            } else if let Ok(v) = word.parse::<f64>() {
                out.push(Token::Num(v));
            }
            // `xmin =`, `intervals [3]:`, `!` comments etc. carry no values
        }
    }
    out
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Cursor<'_> {
    fn num(&mut self) -> Option<f64> {
        match self.tokens.get(self.pos)? {
            Token::Num(v) => {
                self.pos += 1;
                Some(*v)
            }
            _ => None,
        }
    }

    fn string(&mut self) -> Option<String> {
        match self.tokens.get(self.pos)? {
            Token::Str(s) => {
                self.pos += 1;
                Some(s.clone())
            }
            _ => None,
        }
    }
}

fn decode_text(bytes: &[u8]) -> Option<String> {
    let utf16 = |le: bool| {
        let units: Vec<u16> = bytes[2..]
            .chunks_exact(2)
            .map(|p| {
                if le {
                    u16::from_le_bytes([p[0], p[1]])
                } else {
                    u16::from_be_bytes([p[0], p[1]])
                }
            })
            .collect();
        String::from_utf16(&units).ok()
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(true),
        [0xFE, 0xFF, ..] => utf16(false),
        [0xEF, 0xBB, 0xBF, rest @ ..] => String::from_utf8(rest.to_vec()).ok(),
        _ => String::from_utf8(bytes.to_vec()).ok(),
    }
}

/// Parses a TextGrid (long or short text format, UTF-8 or UTF-16) and
/// returns the intervals of one interval tier, silence included.
///
/// With `tier = None` the first tier named like a character/syllable/word
/// tier is used, falling back to the first interval tier.
pub fn parse_textgrid(bytes: &[u8], tier: Option<&str>, path: &Path) -> Result<Vec<Interval>> {
    let bad = |reason: &str| Error::Alignment {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let text = decode_text(bytes).ok_or_else(|| bad("not valid UTF-8 or UTF-16 text"))?;
    let tokens = tokenize(&text);
    let mut cur = Cursor {
        tokens: &tokens,
        pos: 0,
    };

    let file_type = cur.string().ok_or_else(|| bad("missing File type"))?;
    if file_type != "ooTextFile" {
        return Err(bad("not a Praat text file"));
    }
    if cur.string().as_deref() != Some("TextGrid") {
        return Err(bad("object class is not TextGrid"));
    }
    cur.num().ok_or_else(|| bad("missing xmin"))?;
    cur.num().ok_or_else(|| bad("missing xmax"))?;
    if cur.tokens.get(cur.pos) != Some(&Token::Exists) {
        return Ok(Vec::new());
    }
    cur.pos += 1;
    let n_tiers = cur.num().ok_or_else(|| bad("missing tier count"))? as usize;

    let mut tiers: Vec<(String, Vec<Interval>)> = Vec::with_capacity(n_tiers);
    for _ in 0..n_tiers {
        let class = cur.string().ok_or_else(|| bad("missing tier class"))?;
        let name = cur.string().ok_or_else(|| bad("missing tier name"))?;
        cur.num().ok_or_else(|| bad("missing tier xmin"))?;
        cur.num().ok_or_else(|| bad("missing tier xmax"))?;
        let n = cur.num().ok_or_else(|| bad("missing item count"))? as usize;
        match class.as_str() {
            "IntervalTier" => {
                let mut intervals = Vec::with_capacity(n);
                for _ in 0..n {
                    let start_s = cur.num().ok_or_else(|| bad("truncated interval"))?;
                    let end_s = cur.num().ok_or_else(|| bad("truncated interval"))?;
                    let label = cur.string().ok_or_else(|| bad("truncated interval"))?;
                    intervals.push(Interval {
                        start_s,
                        end_s,
                        label,
                    });
                }
                tiers.push((name, intervals));
            }
            "TextTier" => {
                for _ in 0..n {
                    cur.num().ok_or_else(|| bad("truncated point"))?;
                    cur.string().ok_or_else(|| bad("truncated point"))?;
                }
            }
            other => return Err(bad(&format!("unknown tier class {other}"))),
        }
    }

    let chosen = match tier {
        Some(want) => tiers
            .into_iter()
            .find(|(name, _)| name == want)
            .ok_or_else(|| bad(&format!("no interval tier named `{want}`")))?,
        None => {
            let pos = PREFERRED_TIERS
                .iter()
                .find_map(|p| tiers.iter().position(|(n, _)| n.eq_ignore_ascii_case(p)))
                .unwrap_or(0);
            if tiers.is_empty() {
                return Err(bad("no interval tiers"));
            }
            tiers.swap_remove(pos)
        }
    };
    Ok(chosen.1)
}

/// Parses a tabular alignment: `utterance_id, start_s, end_s, label`,
/// tab-separated, optional header line. Rows are grouped per utterance in
/// file order.
pub fn parse_alignment_tsv(text: &str, path: &Path) -> Result<BTreeMap<String, Vec<Interval>>> {
    let mut out: BTreeMap<String, Vec<Interval>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(Error::Alignment {
                path: path.to_path_buf(),
                reason: format!("line {}: expected at least 3 columns", lineno + 1),
            });
        }
        let (start, end) = match (cols[1].trim().parse::<f64>(), cols[2].trim().parse::<f64>()) {
            (Ok(s), Ok(e)) => (s, e),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(Error::Alignment {
                    path: path.to_path_buf(),
                    reason: format!("line {}: unparsable times", lineno + 1),
                })
            }
        };
        let label = cols.get(3).map(|s| s.trim().to_string()).unwrap_or_default();
        out.entry(cols[0].trim().to_string())
            .or_default()
            .push(Interval {
                start_s: start,
                end_s: end,
                label,
            });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LONG: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 1.5
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 1.5
        intervals: size = 1
        intervals [1]:
            xmin = 0
            xmax = 1.5
            text = "x"
    item [2]:
        class = "IntervalTier"
        name = "characters"
        xmin = 0
        xmax = 1.5
        intervals: size = 4
        intervals [1]:
            xmin = 0
            xmax = 0.2
            text = ""
        intervals [2]:
            xmin = 0.2
            xmax = 0.6
            text = "今"
        intervals [3]:
            xmin = 0.6
            xmax = 1.1
            text = "天 ""q"""
        intervals [4]:
            xmin = 1.1
            xmax = 1.5
            text = "sil"
"#;

    const SHORT: &str = "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n0\n1.5\n<exists>\n1\n\"IntervalTier\"\n\"words\"\n0\n1.5\n2\n0\n0.7\n\"a\"\n0.7\n1.5\n\"b\"\n";

    #[test]
    fn long_format_prefers_character_tier() {
        let iv = parse_textgrid(LONG.as_bytes(), None, Path::new("t")).unwrap();
        assert_eq!(iv.len(), 4);
        assert_eq!(iv[1].label, "今");
        assert_eq!(iv[2].label, "天 \"q\"");
        assert!((iv[2].end_s - 1.1).abs() < 1e-12);
        let speech: Vec<_> = iv.iter().filter(|i| !is_silence_label(&i.label)).collect();
        assert_eq!(speech.len(), 2);
    }

    #[test]
    fn explicit_tier() {
        let iv = parse_textgrid(LONG.as_bytes(), Some("phones"), Path::new("t")).unwrap();
        assert_eq!(iv.len(), 1);
        assert!(parse_textgrid(LONG.as_bytes(), Some("nope"), Path::new("t")).is_err());
    }

    #[test]
    fn short_format() {
        let iv = parse_textgrid(SHORT.as_bytes(), None, Path::new("t")).unwrap();
        assert_eq!(iv.len(), 2);
        assert_eq!(iv[1].label, "b");
    }

    #[test]
    fn utf16_textgrid() {
        let mut bytes = vec![0xFF, 0xFE];
        for u in SHORT.encode_utf16() {
            bytes.extend_from_slice(&u.to_le_bytes());
        }
        assert_eq!(parse_textgrid(&bytes, None, Path::new("t")).unwrap().len(), 2);
    }

    #[test]
    fn truncated_textgrid_is_error() {
        let cut = &SHORT[..SHORT.len() - 10];
        assert!(parse_textgrid(cut.as_bytes(), None, Path::new("t")).is_err());
    }

    #[test]
    fn tsv_groups_by_utterance() {
        let text = "utterance_id\tstart_s\tend_s\tlabel\nu1\t0.0\t0.5\tjin1\nu1\t0.5\t0.9\tsil\nu2\t0.1\t0.3\ta\n";
        let map = parse_alignment_tsv(text, Path::new("a.tsv")).unwrap();
        assert_eq!(map["u1"].len(), 2);
        assert_eq!(map["u2"][0].label, "a");
        assert!(parse_alignment_tsv("u1\t0\tzz\tx\nu1\t1\tq\n", Path::new("a")).is_err());
    }

    #[test]
    fn silence_tokens() {
        for s in ["", " ", "sil", "SP", "<eps>"] {
            assert!(is_silence_label(s), "{s:?}");
        }
        assert!(!is_silence_label("a"));
    }
}
