use std::io::{Read, Write};

use super::{AlignedSyllable, Language, ToneLabel};
use crate::error::{Error, Result};

pub const SYLLABLE_TABLE_COLUMNS: [&str; 8] = [
    "utterance_id",
    "start_s",
    "end_s",
    "surface",
    "phoneme_string",
    "tone",
    "onset",
    "rime",
];

/// Writes the syllable table as TSV with 6-decimal fixed-point seconds.
pub fn write_syllable_table<W: Write>(writer: W, syllables: &[AlignedSyllable]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(writer);
    w.write_record(SYLLABLE_TABLE_COLUMNS)?;
    for s in syllables {
        w.write_record([
            s.utterance_id.as_str(),
            &format!("{:.6}", s.start_s),
            &format!("{:.6}", s.end_s),
            &s.surface,
            &s.phoneme_string,
            &s.tone.tone_id().to_string(),
            &s.onset,
            &s.rime,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<syllable table>", e))?;
    Ok(())
}

pub fn read_syllable_table<R: Read>(reader: R, language: Language) -> Result<Vec<AlignedSyllable>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SYLLABLE_TABLE_COLUMNS {
        return Err(Error::Report(format!(
            "syllable table header {header:?} does not match {SYLLABLE_TABLE_COLUMNS:?}"
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Report(format!("syllable table row {}: bad {what}", i + 2));
        let num = |idx: usize, what: &str| rec[idx].parse::<f64>().map_err(|_| bad(what));
        let tone: u8 = rec[5].parse().map_err(|_| bad("tone"))?;
        out.push(AlignedSyllable {
            utterance_id: rec[0].to_string(),
            start_s: num(1, "start_s")?,
            end_s: num(2, "end_s")?,
            surface: rec[3].to_string(),
            phoneme_string: rec[4].to_string(),
            tone: ToneLabel::new(language, tone)?,
            onset: rec[6].to_string(),
            rime: rec[7].to_string(),
        });
    }
    Ok(out)
}
