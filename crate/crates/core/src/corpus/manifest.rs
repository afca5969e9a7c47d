use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::alignment::AlignmentFormat;
use super::Language;
use crate::error::{Error, Result};

/// Where per-utterance transcripts live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TranscriptSource {
    /// THCHS-30 layout: `<audio_root>/<id>.wav.trn`, first line characters,
    /// second line numbered Pinyin. A `.trn` whose first line is a path to
    /// another `.trn` is followed.
    Thchs30,
    /// One TSV file: `utterance_id <TAB> tokens <TAB> surface`, where tokens
    /// are space-separated toned syllables and surface is optional.
    Tsv { path: PathBuf },
}

/// Declarative description of a corpus on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusLayout {
    pub id: String,
    pub language: Language,
    pub audio_root: PathBuf,
    pub transcripts: TranscriptSource,
    /// A directory of `<id>.TextGrid` / `<id>.tsv` files, or a single TSV
    /// covering all utterances.
    pub alignments: PathBuf,
    #[serde(default)]
    pub tier: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub tokens: Vec<String>,
    /// Per-syllable surface forms; empty when unavailable.
    pub surface: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub audio: PathBuf,
    pub transcript: TranscriptEntry,
    pub alignment: PathBuf,
    pub alignment_format: AlignmentFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub language: Language,
    pub audio_root: PathBuf,
    pub sample_rate: u32,
    pub tier: Option<String>,
    /// Sorted by utterance id.
    pub entries: Vec<ManifestEntry>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_trn(path: &Path) -> Result<(String, String)> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("").trim().to_string();
    if first.ends_with(".trn") && !first.contains(' ') {
        let target = path.parent().unwrap_or(Path::new(".")).join(&first);
        return read_trn(&target);
    }
    let second = lines.next().unwrap_or("").trim().to_string();
    Ok((first, second))
}

fn surface_for(language: Language, raw_surface: &str, n_tokens: usize) -> Vec<String> {
    let units: Vec<String> = match language {
        // characters; word spacing in the transcript is irrelevant
        Language::Mandarin => raw_surface
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_string())
            .collect(),
        Language::Vietnamese => raw_surface.split_whitespace().map(str::to_string).collect(),
    };
    if units.len() == n_tokens {
        units
    } else {
        Vec::new()
    }
}

impl CorpusManifest {
    /// Resolves a layout into per-utterance entries. Utterances are taken
    /// from the transcript source; audio and alignment paths are derived
    /// from the utterance id and may not exist (ingest reports those).
    pub fn discover(layout: &CorpusLayout) -> Result<Self> {
        let mut transcripts: BTreeMap<String, TranscriptEntry> = BTreeMap::new();
        match &layout.transcripts {
            TranscriptSource::Thchs30 => {
                let dir = fs::read_dir(&layout.audio_root)
                    .map_err(|e| Error::io(&layout.audio_root, e))?;
                for entry in dir {
                    let entry = entry.map_err(|e| Error::io(&layout.audio_root, e))?;
                    let name = entry.file_name().to_string_lossy().into_owned();
                    let Some(id) = name.strip_suffix(".wav.trn") else {
                        continue;
                    };
                    let (chars, pinyin) = read_trn(&entry.path())?;
                    let tokens: Vec<String> =
                        pinyin.split_whitespace().map(str::to_string).collect();
                    let surface = surface_for(layout.language, &chars, tokens.len());
                    transcripts.insert(id.to_string(), TranscriptEntry { tokens, surface });
                }
            }
            TranscriptSource::Tsv { path } => {
                for line in read_text(path)?.lines() {
                    let line = line.trim_end_matches('\r');
                    if line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut cols = line.splitn(3, '\t');
                    let id = cols.next().unwrap_or("").trim();
                    let toks = cols.next().unwrap_or("");
                    if id == "utterance_id" {
                        continue;
                    }
                    let tokens: Vec<String> = toks.split_whitespace().map(str::to_string).collect();
                    let surface = surface_for(layout.language, cols.next().unwrap_or(""), tokens.len());
                    transcripts.insert(id.to_string(), TranscriptEntry { tokens, surface });
                }
            }
        }

        let single_file = layout.alignments.is_file();
        let entries = transcripts
            .into_iter()
            .map(|(utterance_id, transcript)| {
                let (alignment, alignment_format) = if single_file {
                    (layout.alignments.clone(), AlignmentFormat::Tsv)
                } else {
                    let tg = layout.alignments.join(format!("{utterance_id}.TextGrid"));
                    if tg.exists() {
                        (tg, AlignmentFormat::TextGrid)
                    } else {
                        (
                            layout.alignments.join(format!("{utterance_id}.tsv")),
                            AlignmentFormat::Tsv,
                        )
                    }
                };
                ManifestEntry {
                    audio: layout.audio_root.join(format!("{utterance_id}.wav")),
                    utterance_id,
                    transcript,
                    alignment,
                    alignment_format,
                }
            })
            .collect();

        Ok(CorpusManifest {
            corpus_id: layout.id.clone(),
            language: layout.language,
            audio_root: layout.audio_root.clone(),
            sample_rate: super::SAMPLE_RATE,
            tier: layout.tier.clone(),
            entries,
        })
    }

    pub fn entry(&self, utterance_id: &str) -> Option<&ManifestEntry> {
        self.entries
            .binary_search_by(|e| e.utterance_id.as_str().cmp(utterance_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Keeps a deterministic pseudo-random subset of utterances; membership
    /// of an utterance depends only on `(seed, utterance_id)`.
    pub fn subsample(&mut self, fraction: f64, seed: u64) {
        if fraction >= 1.0 {
            return;
        }
        self.entries
            .retain(|e| crate::hash::unit_interval(seed, &e.utterance_id) < fraction);
    }
}
