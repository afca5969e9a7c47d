//! Synthetic Mandarin mini-corpus for end-to-end runs without real data.
//!
//! Each syllable is an onset (band-limited noise whose centre frequency and
//! length depend on the consonant) followed by a harmonic vowel whose F0
//! follows a contour per tone and whose spectral envelope follows the rime's
//! first vowel. Phonotactics are free: any onset combines with any rime.
//! Half the utterances get TextGrid alignments, the other half TSV.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::write_wav;
use crate::corpus::{CorpusLayout, Language, TranscriptSource, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::hash::seed_for;
use crate::probe::consonant_task_onsets;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub corpus_id: String,
    pub n_utterances: usize,
    pub syllables: std::ops::RangeInclusive<usize>,
    pub seed: u64,
    /// Share of syllables drawn from the consonant-task onsets.
    pub group_onset_share: f64,
    pub neutral_share: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            corpus_id: "mini".into(),
            n_utterances: 20,
            syllables: 16..=24,
            seed: 2024,
            group_onset_share: 0.6,
            neutral_share: 0.07,
        }
    }
}

const OTHER_ONSETS: [&str; 14] = ["", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "r"];
const RIMES: [&str; 18] = [
    "a", "o", "e", "i", "u", "v", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "ia", "uo", "ie",
];
const SPEAKER_F0: [f64; 5] = [110.0, 135.0, 180.0, 210.0, 240.0];

/// (centre Hz, duration s, amplitude, voiced murmur)
fn onset_shape(onset: &str) -> (f64, f64, f64, bool) {
    match onset {
        "sh" => (2800.0, 0.090, 0.20, false),
        "x" => (4300.0, 0.090, 0.18, false),
        "s" => (6500.0, 0.090, 0.16, false),
        "zh" => (2600.0, 0.035, 0.22, false),
        "ch" => (2900.0, 0.075, 0.22, false),
        "q" => (4100.0, 0.075, 0.20, false),
        "z" => (6000.0, 0.035, 0.20, false),
        "c" => (6800.0, 0.075, 0.18, false),
        "j" => (3900.0, 0.035, 0.20, false),
        "b" | "d" | "g" => (1500.0, 0.012, 0.30, false),
        "p" | "t" | "k" => (2000.0, 0.050, 0.18, false),
        "f" | "h" => (1200.0, 0.060, 0.08, false),
        "m" | "n" | "l" | "r" => (300.0, 0.050, 0.15, true),
        _ => (0.0, 0.0, 0.0, false),
    }
}

fn formants(rime: &str) -> (f64, f64) {
    match rime.chars().next() {
        Some('a') => (800.0, 1300.0),
        Some('o') => (500.0, 900.0),
        Some('e') => (500.0, 1500.0),
        Some('i') => (300.0, 2300.0),
        Some('u') => (320.0, 800.0),
        _ => (300.0, 1900.0),
    }
}

/// Semitones relative to the speaker's base F0 at normalised time `u`.
fn tone_contour(tone: u8, u: f64) -> f64 {
    match tone {
        1 => 4.0,
        2 => -1.0 + 5.0 * u * u,
        3 => {
            if u < 0.6 {
                -1.0 - 4.0 * (u / 0.6)
            } else {
                -5.0 + 3.0 * (u - 0.6) / 0.4
            }
        }
        4 => 5.0 - 9.0 * u,
        _ => 0.5 - u,
    }
}

fn band_noise(rng: &mut ChaCha8Rng, n: usize, centre: f64, width: usize) -> Vec<f64> {
    let white: Vec<f64> = (0..n + width).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = Vec::with_capacity(n);
    let mut acc: f64 = white[..width].iter().sum();
    for i in 0..n {
        let t = i as f64 / SAMPLE_RATE as f64;
        out.push(acc / width as f64 * (2.0 * PI * centre * t).cos() * 3.0);
        acc += white[i + width] - white[i];
    }
    out
}

fn ramp(i: usize, n: usize) -> f64 {
    let r = (0.01 * SAMPLE_RATE as f64) as usize;
    let a = (i as f64 / r as f64).min(1.0);
    let b = ((n - i) as f64 / r as f64).min(1.0);
    a.min(b)
}

struct Syllable {
    onset: &'static str,
    rime: &'static str,
    tone: u8,
}

impl Syllable {
    fn token(&self) -> String {
        format!("{}{}{}", self.onset, self.rime, self.tone)
    }

    /// A stand-in Han character fixed by the toned syllable.
    fn character(&self) -> char {
        let code = 0x4E00 + (seed_for(0, &self.token()) % 0x4000) as u32;
        char::from_u32(code).expect("CJK block")
    }
}

fn synthesize(rng: &mut ChaCha8Rng, syl: &Syllable, base_f0: f64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let (centre, onset_s, amp, murmur) = onset_shape(syl.onset);
    let mut out = Vec::new();
    if onset_s > 0.0 {
        let n = (onset_s * sr) as usize;
        if murmur {
            for i in 0..n {
                let t = i as f64 / sr;
                out.push(amp * ramp(i, n) * (2.0 * PI * base_f0 * t).sin() * (2.0 * PI * centre * t).cos());
            }
        } else {
            let noise = band_noise(rng, n, centre, 6);
            out.extend(noise.iter().enumerate().map(|(i, v)| amp * ramp(i, n) * v));
        }
    }
    let vowel_s = if syl.tone == 5 {
        rng.random_range(0.08..0.12)
    } else {
        rng.random_range(0.15..0.23)
    };
    let n = (vowel_s * sr) as usize;
    let (f1, f2) = formants(syl.rime);
    let nasal = syl.rime.ends_with('n') || syl.rime.ends_with("ng");
    let gain = if syl.tone == 5 { 0.18 } else { 0.3 };
    let mut phase = 0.0;
    for i in 0..n {
        let u = i as f64 / n as f64;
        let f0 = base_f0 * 2f64.powf(tone_contour(syl.tone, u) / 12.0);
        phase += 2.0 * PI * f0 / sr;
        let tail = nasal && u > 0.7;
        let mut v = 0.0;
        let mut k = 1;
        while k as f64 * f0 < 4000.0 {
            let h = k as f64 * f0;
            let env = (-((h - f1) / 150.0).powi(2)).exp()
                + if tail { 0.2 } else { 0.7 } * (-((h - f2) / 200.0).powi(2)).exp()
                + 0.05;
            v += env * (k as f64 * phase).sin() / k as f64;
            k += 1;
        }
        let nasal_gain = if tail { 0.5 } else { 1.0 };
        out.push(gain * nasal_gain * ramp(i, n) * v);
    }
    out
}

fn textgrid(duration: f64, intervals: &[(f64, f64, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(s, "xmin = 0\nxmax = {duration}\ntiers? <exists>\nsize = 1\nitem []:");
    let _ = writeln!(s, "    item [1]:\n        class = \"IntervalTier\"\n        name = \"characters\"");
    let _ = writeln!(s, "        xmin = 0\n        xmax = {duration}\n        intervals: size = {}", intervals.len());
    for (i, (a, b, l)) in intervals.iter().enumerate() {
        let _ = writeln!(
            s,
            "        intervals [{}]:\n            xmin = {a}\n            xmax = {b}\n            text = \"{l}\"",
            i + 1
        );
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the corpus under `root` and returns its layout.
pub fn write_mini_corpus(root: &Path, spec: &FixtureSpec) -> Result<CorpusLayout> {
    let wav_dir = root.join("wav");
    let align_dir = root.join("align");
    for d in [&wav_dir, &align_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let group = consonant_task_onsets();
    let sr = SAMPLE_RATE as f64;
    let mut transcripts = String::from("utterance_id\ttokens\tsurface\n");

    for u in 0..spec.n_utterances {
        let id = format!("{}_{:03}", spec.corpus_id, u);
        let base_f0 = SPEAKER_F0[u % SPEAKER_F0.len()] * rng.random_range(0.95..1.05);
        let n_syl = rng.random_range(spec.syllables.clone());
        let syls: Vec<Syllable> = (0..n_syl)
            .map(|_| {
                let onset = if rng.random_bool(spec.group_onset_share) {
                    *group.choose(&mut rng).expect("non-empty")
                } else {
                    *OTHER_ONSETS.choose(&mut rng).expect("non-empty")
                };
                let tone = if rng.random_bool(spec.neutral_share) { 5 } else { rng.random_range(1..=4) };
                Syllable {
                    onset,
                    rime: RIMES.choose(&mut rng).expect("non-empty"),
                    tone,
                }
            })
            .collect();

        let lead = 0.15;
        let mut audio: Vec<f64> = vec![0.0; (lead * sr) as usize];
        let mut intervals = vec![(0.0, lead, "sil".to_string())];
        for s in &syls {
            let start = audio.len() as f64 / sr;
            audio.extend(synthesize(&mut rng, s, base_f0));
            let end = audio.len() as f64 / sr;
            intervals.push((start, end, s.character().to_string()));
            let gap = rng.random_range(0.01..0.05);
            audio.extend(std::iter::repeat_n(0.0, (gap * sr) as usize));
            intervals.push((end, audio.len() as f64 / sr, "sp".to_string()));
        }
        audio.extend(std::iter::repeat_n(0.0, (0.15 * sr) as usize));
        let duration = audio.len() as f64 / sr;
        intervals.last_mut().expect("non-empty").1 = duration;
        let samples: Vec<f32> = audio
            .iter()
            .map(|v| (v + 0.003 * Distribution::<f64>::sample(&StandardNormal, &mut rng)) as f32)
            .collect();
        write_wav(&wav_dir.join(format!("{id}.wav")), &samples)?;

        if u % 2 == 0 {
            write(&align_dir.join(format!("{id}.TextGrid")), &textgrid(duration, &intervals))?;
        } else {
            let mut tsv = String::from("utterance_id\tstart_s\tend_s\tlabel\n");
            for (a, b, l) in &intervals {
                let _ = writeln!(tsv, "{id}\t{a:.6}\t{b:.6}\t{l}");
            }
            write(&align_dir.join(format!("{id}.tsv")), &tsv)?;
        }
        let tokens: Vec<String> = syls.iter().map(Syllable::token).collect();
        let surface: String = syls.iter().map(Syllable::character).collect();
        let _ = writeln!(transcripts, "{id}\t{}\t{surface}", tokens.join(" "));
    }
    let transcript_path = root.join("transcripts.tsv");
    write(&transcript_path, &transcripts)?;
    Ok(CorpusLayout {
        id: spec.corpus_id.clone(),
        language: Language::Mandarin,
        audio_root: wav_dir,
        transcripts: TranscriptSource::Tsv {
            path: transcript_path,
        },
        alignments: align_dir,
        tier: Some("characters".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_corpus, CorpusManifest};
    use crate::exec::Parallelism;

    #[test]
    fn fixture_ingests_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let layout = write_mini_corpus(dir.path(), &FixtureSpec::default()).unwrap();
        let manifest = CorpusManifest::discover(&layout).unwrap();
        assert_eq!(manifest.entries.len(), 20);
        let ing = load_corpus(&manifest, Parallelism::Sequential).unwrap();
        assert!(ing.report.reconciles());
        assert_eq!(ing.report.utterances_emitted, 20);
        assert!((320..=480).contains(&ing.syllables.len()), "{}", ing.syllables.len());
        assert!(ing.syllables.iter().all(|s| s.surface.chars().count() == 1));
    }

    #[test]
    fn fixture_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_mini_corpus(a.path(), &FixtureSpec::default()).unwrap();
        write_mini_corpus(b.path(), &FixtureSpec::default()).unwrap();
        for name in ["transcripts.tsv", "wav/mini_007.wav", "align/mini_004.TextGrid", "align/mini_005.tsv"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }
}
