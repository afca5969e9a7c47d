use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::alignment::{is_silence_label, parse_alignment_tsv, parse_textgrid, Interval};
use super::manifest::{CorpusManifest, ManifestEntry};
use super::{
    parse_pinyin, parse_vietnamese_ipa, split_vietnamese_onset, AlignedSyllable, Language,
    ToneLabel,
};
use crate::error::{Error, Result};
use crate::exec::Parallelism;

/// Fraction of count-mismatched utterances above which ingest fails.
pub const MAX_MISMATCH_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UtteranceSkip {
    Unreadable { utterance_id: String, detail: String, syllables: usize },
    Mismatch { utterance_id: String, transcript: usize, aligned: usize },
    BadToken { utterance_id: String, token: String, syllables: usize },
    InvalidAlignment { utterance_id: String, detail: String, syllables: usize },
}

impl UtteranceSkip {
    /// Transcript syllables lost with this utterance.
    pub fn syllables(&self) -> usize {
        match self {
            UtteranceSkip::Unreadable { syllables, .. }
            | UtteranceSkip::BadToken { syllables, .. }
            | UtteranceSkip::InvalidAlignment { syllables, .. } => *syllables,
            UtteranceSkip::Mismatch { transcript, .. } => *transcript,
        }
    }
}

/// Accounting for one ingest: every transcript syllable is either emitted
/// or attributed to a skipped utterance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub corpus_id: String,
    pub utterances: usize,
    pub utterances_emitted: usize,
    pub transcript_syllables: usize,
    pub emitted_syllables: usize,
    pub neutral_tone_syllables: usize,
    pub rejected_tokens: usize,
    pub skips: Vec<UtteranceSkip>,
}

impl IngestReport {
    pub fn skipped_syllables(&self) -> usize {
        self.skips.iter().map(UtteranceSkip::syllables).sum()
    }

    pub fn mismatched_utterances(&self) -> usize {
        self.skips
            .iter()
            .filter(|s| matches!(s, UtteranceSkip::Mismatch { .. }))
            .count()
    }

    pub fn reconciles(&self) -> bool {
        self.transcript_syllables == self.emitted_syllables + self.skipped_syllables()
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub syllables: Vec<AlignedSyllable>,
    pub report: IngestReport,
}

struct ParsedToken {
    phoneme_string: String,
    tone: ToneLabel,
    onset: String,
    rime: String,
}

fn parse_token(language: Language, token: &str) -> Result<ParsedToken> {
    match language {
        Language::Mandarin => {
            let p = parse_pinyin(token)?;
            Ok(ParsedToken {
                tone: ToneLabel::new(language, p.tone)?,
                phoneme_string: p.base,
                onset: p.onset,
                rime: p.rime,
            })
        }
        Language::Vietnamese => {
            let p = parse_vietnamese_ipa(token)?;
            let (onset, rime) = split_vietnamese_onset(&p.segments);
            Ok(ParsedToken {
                tone: ToneLabel::new(language, p.tone)?,
                onset: onset.to_string(),
                rime: rime.to_string(),
                phoneme_string: p.segments,
            })
        }
    }
}

type ParsedTable = std::sync::Arc<Result<HashMap<String, Vec<Interval>>, String>>;

/// Shared per-file TSV tables so a corpus-wide alignment file is parsed once.
#[derive(Default)]
struct TsvTables {
    tables: Mutex<HashMap<PathBuf, ParsedTable>>,
}

impl TsvTables {
    fn intervals(&self, path: &Path, utterance_id: &str) -> Result<Vec<Interval>, String> {
        let table = {
            let mut guard = self.tables.lock().expect("alignment table lock");
            guard
                .entry(path.to_path_buf())
                .or_insert_with(|| {
                    let parsed = fs::read_to_string(path)
                        .map_err(|e| format!("{}: {e}", path.display()))
                        .and_then(|text| {
                            parse_alignment_tsv(&text, path)
                                .map(|m| m.into_iter().collect())
                                .map_err(|e| e.to_string())
                        });
                    std::sync::Arc::new(parsed)
                })
                .clone()
        };
        match table.as_ref() {
            Ok(map) => map
                .get(utterance_id)
                .cloned()
                .ok_or_else(|| format!("no rows for `{utterance_id}` in {}", path.display())),
            Err(e) => Err(e.clone()),
        }
    }
}

fn read_intervals(
    entry: &ManifestEntry,
    tier: Option<&str>,
    tsv: &TsvTables,
) -> Result<Vec<Interval>, String> {
    use super::alignment::AlignmentFormat;
    match entry.alignment_format {
        AlignmentFormat::TextGrid => {
            let bytes = fs::read(&entry.alignment)
                .map_err(|e| format!("{}: {e}", entry.alignment.display()))?;
            parse_textgrid(&bytes, tier, &entry.alignment).map_err(|e| e.to_string())
        }
        AlignmentFormat::Tsv => tsv.intervals(&entry.alignment, &entry.utterance_id),
    }
}

fn check_spans(spans: &[Interval]) -> Result<(), String> {
    let mut prev_end = f64::NEG_INFINITY;
    for iv in spans {
        if !(iv.start_s >= 0.0 && iv.end_s > iv.start_s) {
            return Err(format!("bad span [{}, {})", iv.start_s, iv.end_s));
        }
        if iv.start_s < prev_end - 1e-9 {
            return Err(format!("span at {} overlaps previous", iv.start_s));
        }
        prev_end = iv.end_s;
    }
    Ok(())
}

fn ingest_utterance(
    manifest: &CorpusManifest,
    entry: &ManifestEntry,
    tsv: &TsvTables,
) -> (Result<Vec<AlignedSyllable>, UtteranceSkip>, usize) {
    let n = entry.transcript.tokens.len();
    let id = entry.utterance_id.clone();

    let mut parsed = Vec::with_capacity(n);
    let mut rejected = 0;
    let mut first_bad = None;
    for tok in &entry.transcript.tokens {
        match parse_token(manifest.language, tok) {
            Ok(p) => parsed.push(p),
            Err(_) => {
                rejected += 1;
                first_bad.get_or_insert_with(|| tok.clone());
            }
        }
    }
    if let Some(token) = first_bad {
        return (
            Err(UtteranceSkip::BadToken {
                utterance_id: id,
                token,
                syllables: n,
            }),
            rejected,
        );
    }

    if !entry.audio.is_file() {
        return (
            Err(UtteranceSkip::Unreadable {
                utterance_id: id,
                detail: format!("missing audio {}", entry.audio.display()),
                syllables: n,
            }),
            0,
        );
    }

    let intervals = match read_intervals(entry, manifest.tier.as_deref(), tsv) {
        Ok(iv) => iv,
        Err(detail) => {
            return (
                Err(UtteranceSkip::Unreadable {
                    utterance_id: id,
                    detail,
                    syllables: n,
                }),
                0,
            )
        }
    };
    let speech: Vec<Interval> = intervals
        .into_iter()
        .filter(|iv| !is_silence_label(&iv.label))
        .collect();
    if let Err(detail) = check_spans(&speech) {
        return (
            Err(UtteranceSkip::InvalidAlignment {
                utterance_id: id,
                detail,
                syllables: n,
            }),
            0,
        );
    }
    if speech.len() != n {
        return (
            Err(UtteranceSkip::Mismatch {
                utterance_id: id,
                transcript: n,
                aligned: speech.len(),
            }),
            0,
        );
    }

    let surface = &entry.transcript.surface;
    let syllables = parsed
        .into_iter()
        .zip(speech)
        .enumerate()
        .map(|(i, (p, iv))| AlignedSyllable {
            utterance_id: entry.utterance_id.clone(),
            start_s: iv.start_s,
            end_s: iv.end_s,
            surface: surface
                .get(i)
                .cloned()
                .unwrap_or_else(|| entry.transcript.tokens[i].clone()),
            phoneme_string: p.phoneme_string,
            tone: p.tone,
            onset: p.onset,
            rime: p.rime,
        })
        .collect();
    (Ok(syllables), 0)
}

/// Ingests every utterance of `manifest` in manifest order.
///
/// Neutral-tone syllables are kept here (they are needed for sentence-level
/// text context) and counted; probe datasets drop them.
pub fn load_corpus(manifest: &CorpusManifest, par: Parallelism) -> Result<Ingested> {
    let tsv = TsvTables::default();
    let per_utt = par.map(&manifest.entries, |e| ingest_utterance(manifest, e, &tsv));

    let mut report = IngestReport {
        corpus_id: manifest.corpus_id.clone(),
        utterances: manifest.entries.len(),
        ..Default::default()
    };
    let mut syllables = Vec::new();
    for (entry, (outcome, rejected)) in manifest.entries.iter().zip(per_utt) {
        report.transcript_syllables += entry.transcript.tokens.len();
        report.rejected_tokens += rejected;
        match outcome {
            Ok(syls) => {
                report.utterances_emitted += 1;
                report.emitted_syllables += syls.len();
                report.neutral_tone_syllables += syls.iter().filter(|s| s.tone.is_neutral()).count();
                syllables.extend(syls);
            }
            Err(skip) => {
                warn!("skipping utterance: {skip:?}");
                report.skips.push(skip);
            }
        }
    }
    debug_assert!(report.reconciles());

    let mismatched = report.mismatched_utterances();
    if report.utterances > 0 {
        let rate = mismatched as f64 / report.utterances as f64;
        if rate > MAX_MISMATCH_RATE {
            return Err(Error::MismatchRate {
                mismatched,
                total: report.utterances,
                rate: 100.0 * rate,
                threshold: 100.0 * MAX_MISMATCH_RATE,
            });
        }
    }
    info!(
        "{}: {} syllables from {}/{} utterances ({} skipped)",
        report.corpus_id,
        report.emitted_syllables,
        report.utterances_emitted,
        report.utterances,
        report.skips.len()
    );
    Ok(Ingested { syllables, report })
}
