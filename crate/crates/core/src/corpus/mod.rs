//! Transcript and alignment ingestion.
//!
//! Produces one [`AlignedSyllable`] per tone-bearing unit. Mandarin labels
//! come from numbered Pinyin and are always the citation tone written in the
//! transcript (no sandhi rewriting). Vietnamese labels come from phonetizer
//! output in the eight-tone scheme.

mod alignment;
mod ingest;
mod manifest;
mod pinyin;
mod table;
mod vietnamese;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alignment::{
    is_silence_label, parse_alignment_tsv, parse_textgrid, AlignmentFormat, Interval,
};
pub use ingest::{load_corpus, IngestReport, Ingested, UtteranceSkip, MAX_MISMATCH_RATE};
pub use manifest::{CorpusLayout, CorpusManifest, ManifestEntry, TranscriptEntry, TranscriptSource};
pub use pinyin::{parse_pinyin, PinyinSyllable, MANDARIN_INITIALS};
pub use table::{read_syllable_table, write_syllable_table, SYLLABLE_TABLE_COLUMNS};
pub use vietnamese::{parse_vietnamese_ipa, split_vietnamese_onset, VietnameseSyllable};

/// Only 16 kHz mono audio is supported; resampling is a pre-step.
pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Mandarin,
    Vietnamese,
}

impl Language {
    pub fn as_str(&self) -> &'static str {
        match self {
            Language::Mandarin => "mandarin",
            Language::Vietnamese => "vietnamese",
        }
    }

    /// Highest tone id accepted at ingest. Mandarin 5 is the neutral tone.
    pub fn max_tone(&self) -> u8 {
        match self {
            Language::Mandarin => 5,
            Language::Vietnamese => 8,
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mandarin" => Ok(Language::Mandarin),
            "vietnamese" => Ok(Language::Vietnamese),
            other => Err(format!("unsupported corpus language `{other}`")),
        }
    }
}

pub const MANDARIN_NEUTRAL_TONE: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ToneLabel {
    language: Language,
    tone_id: u8,
}

impl ToneLabel {
    pub fn new(language: Language, tone_id: u8) -> Result<Self> {
        if tone_id == 0 || tone_id > language.max_tone() {
            return Err(Error::InvalidTone {
                language: language.as_str(),
                tone: tone_id,
            });
        }
        Ok(ToneLabel { language, tone_id })
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn tone_id(&self) -> u8 {
        self.tone_id
    }

    pub fn is_neutral(&self) -> bool {
        self.language == Language::Mandarin && self.tone_id == MANDARIN_NEUTRAL_TONE
    }
}

/// One aligned tone-bearing unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSyllable {
    pub utterance_id: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Character (Mandarin) or orthographic syllable (Vietnamese).
    pub surface: String,
    /// Toneless segmental string, e.g. `hao`.
    pub phoneme_string: String,
    pub tone: ToneLabel,
    pub onset: String,
    pub rime: String,
}

impl AlignedSyllable {
    pub fn midpoint_s(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

/// Drops Mandarin neutral-tone syllables and returns how many were removed.
/// Non-Mandarin syllables pass through untouched.
pub fn filter_neutral_tone(syllables: Vec<AlignedSyllable>) -> (Vec<AlignedSyllable>, usize) {
    let before = syllables.len();
    let kept: Vec<_> = syllables
        .into_iter()
        .filter(|s| !s.tone.is_neutral())
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}
