//! Corpus-level feature assembly: pooled encoder layers and baseline
//! windows, one row per syllable in table order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::debug;

use super::activations::CheckpointStep;
use super::baseline::{f0_window, mfcc_window, BaselineKind};
use super::cache::{ActivationCache, CacheKey};
use super::encoder::{extract_activations, EncoderAdapter};
use super::frames::FrameGeometry;
use super::mfcc::{MfccFrames, MfccParams};
use super::pitch::{F0Track, PitchParams};
use super::text::{text_embeddings, TextEncoder};
use crate::audio::read_wav;
use crate::corpus::AlignedSyllable;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::matrix::FeatureMatrix;

/// Contiguous `[start, end)` row ranges of each utterance in a syllable
/// table sorted by utterance.
pub fn utterance_spans(syllables: &[AlignedSyllable]) -> Vec<(String, std::ops::Range<usize>)> {
    let mut out: Vec<(String, std::ops::Range<usize>)> = Vec::new();
    for (i, s) in syllables.iter().enumerate() {
        match out.last_mut() {
            Some((id, r)) if *id == s.utterance_id => r.end = i + 1,
            _ => out.push((s.utterance_id.clone(), i..i + 1)),
        }
    }
    out
}

/// Identifies one checkpoint of one model for caching purposes.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderRef {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub geometry: FrameGeometry,
    pub n_layers: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub cache_hits: usize,
    pub extracted: usize,
}

/// Ensures every utterance's activations are cached, running `adapter`
/// where they are missing. Non-reentrant adapters run one utterance at a
/// time regardless of `par`.
pub fn extract_to_cache(
    encoder: &EncoderRef,
    adapter: Option<&dyn EncoderAdapter>,
    utterances: &[String],
    audio_path: &(dyn Fn(&str) -> PathBuf + Sync),
    cache: &ActivationCache,
    par: Parallelism,
) -> Result<ExtractStats> {
    let layer_set: Vec<usize> = (0..encoder.n_layers).collect();
    let key = |utt: &str| CacheKey {
        model_id: encoder.model_id.clone(),
        checkpoint_step: encoder.checkpoint_step,
        utterance_id: utt.to_string(),
        layer_set: layer_set.clone(),
    };
    let missing: Vec<String> = utterances
        .iter()
        .filter(|u| !cache.contains(&key(u)))
        .cloned()
        .collect();
    let stats = ExtractStats {
        cache_hits: utterances.len() - missing.len(),
        extracted: missing.len(),
    };
    if !missing.is_empty() {
        let adapter = adapter.ok_or_else(|| {
            Error::Adapter(format!(
                "{} utterances of `{}` at step {} are not cached and no encoder is available",
                missing.len(),
                encoder.model_id,
                encoder.checkpoint_step
            ))
        })?;
        let run = |utt: &String| -> Result<()> {
            let audio = read_wav(&audio_path(utt))?;
            let acts = extract_activations(adapter, utt, &audio, &layer_set)?;
            cache.put(&acts)?;
            Ok(())
        };
        let par = if adapter.reentrant() { par } else { Parallelism::Sequential };
        for r in par.map(&missing, run) {
            r?;
        }
    }
    cache.record_completed(
        &encoder.model_id,
        encoder.checkpoint_step,
        &layer_set,
        utterances.iter().map(String::as_str),
    )?;
    debug!("{} @ {}: {:?}", encoder.model_id, encoder.checkpoint_step, stats);
    Ok(stats)
}

/// Pooled syllable vectors of the encoder layers in `layers`: `result[i]`
/// is the `n_syllables x dim` matrix of layer `layers[i]`. All activations
/// must be cached.
pub fn pooled_layer_features(
    encoder: &EncoderRef,
    syllables: &[AlignedSyllable],
    cache: &ActivationCache,
    layers: &[usize],
    par: Parallelism,
) -> Result<Vec<FeatureMatrix>> {
    let layer_set: Vec<usize> = (0..encoder.n_layers).collect();
    if let Some(&l) = layers.iter().find(|&&l| l >= encoder.n_layers) {
        return Err(Error::MissingLayers {
            model: encoder.model_id.clone(),
            available: encoder.n_layers,
            requested: l + 1,
        });
    }
    let spans = utterance_spans(syllables);
    let pooled = par.map(&spans, |(utt, range)| -> Result<Vec<Vec<Vec<f32>>>> {
        let key = CacheKey {
            model_id: encoder.model_id.clone(),
            checkpoint_step: encoder.checkpoint_step,
            utterance_id: utt.clone(),
            layer_set: layer_set.clone(),
        };
        let acts = cache.get(&key, encoder.geometry).ok_or_else(|| {
            Error::Adapter(format!(
                "activations of `{utt}` for `{}` at step {} missing from cache",
                encoder.model_id, encoder.checkpoint_step
            ))
        })?;
        if acts.dim != encoder.dim {
            return Err(Error::Dimension {
                what: "cached activation width",
                expected: encoder.dim,
                actual: acts.dim,
            });
        }
        Ok(syllables[range.clone()]
            .iter()
            .map(|s| {
                let range = acts.geometry.time_to_frames(s.start_s, s.end_s, acts.n_frames);
                layers.iter().map(|&l| acts.mean_over(l, range.clone())).collect()
            })
            .collect())
    });

    let mut out: Vec<Vec<f32>> = vec![Vec::with_capacity(syllables.len() * encoder.dim); layers.len()];
    for utt in pooled {
        for per_layer in utt? {
            for (dst, v) in out.iter_mut().zip(per_layer) {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Probe("non-finite pooled activation".into()));
                }
                dst.extend_from_slice(&v);
            }
        }
    }
    out.into_iter()
        .map(|data| FeatureMatrix::from_vec(syllables.len(), encoder.dim, data))
        .collect()
}

/// Baseline vectors for every syllable. The text baseline encodes each
/// utterance's full surface sequence, so `syllables` should include
/// neutral-tone units for context.
pub fn baseline_features(
    kind: BaselineKind,
    syllables: &[AlignedSyllable],
    audio_path: &(dyn Fn(&str) -> PathBuf + Sync),
    text_encoder: Option<&dyn TextEncoder>,
    par: Parallelism,
) -> Result<FeatureMatrix> {
    let spans = utterance_spans(syllables);
    let rows = par.map(&spans, |(utt, range)| -> Result<Vec<Vec<f32>>> {
        let syls = &syllables[range.clone()];
        match kind {
            BaselineKind::F0 => {
                let track = F0Track::compute(&read_wav(&audio_path(utt))?, PitchParams::default());
                Ok(syls.iter().map(|s| f0_window(&track, s).into_vec()).collect())
            }
            BaselineKind::Mfcc => {
                let frames = MfccFrames::compute(&read_wav(&audio_path(utt))?, MfccParams::default());
                Ok(syls.iter().map(|s| mfcc_window(&frames, s).into_vec()).collect())
            }
            BaselineKind::Text => {
                let enc = text_encoder
                    .ok_or_else(|| Error::Adapter("text baseline needs a text encoder".into()))?;
                let chars: Vec<String> = syls.iter().map(|s| s.surface.clone()).collect();
                Ok(text_embeddings(enc, &chars)?
                    .into_iter()
                    .map(|v| v.into_vec())
                    .collect())
            }
        }
    });
    let mut all = Vec::with_capacity(syllables.len());
    for r in rows {
        all.extend(r?);
    }
    FeatureMatrix::from_rows(&all, kind.dim())
}

/// WAV path per utterance id, falling back to `<root>/<id>.wav`.
pub struct AudioIndex {
    paths: HashMap<String, PathBuf>,
    fallback_root: PathBuf,
}

impl AudioIndex {
    pub fn new(paths: HashMap<String, PathBuf>, fallback_root: &Path) -> Self {
        AudioIndex {
            paths,
            fallback_root: fallback_root.to_path_buf(),
        }
    }

    pub fn path(&self, utt: &str) -> PathBuf {
        self.paths
            .get(utt)
            .cloned()
            .unwrap_or_else(|| self.fallback_root.join(format!("{utt}.wav")))
    }
}
