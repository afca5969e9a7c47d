//! Fixed-size acoustic baselines: a 21-frame (10-1-10) window of F0 values
//! or of 40-dimensional MFCC frames around the syllable midpoint.

use serde::{Deserialize, Serialize};

use super::mfcc::{MfccFrames, MfccParams, N_MFCC};
use super::pitch::{F0Track, PitchParams};
use crate::corpus::AlignedSyllable;
use crate::error::{Error, Result};

pub const WINDOW_HALF: usize = 10;
pub const WINDOW_LEN: usize = 2 * WINDOW_HALF + 1;
pub const F0_DIM: usize = WINDOW_LEN;
pub const MFCC_DIM: usize = WINDOW_LEN * N_MFCC;
pub const TEXT_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    F0,
    Mfcc,
    Text,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::F0, BaselineKind::Mfcc, BaselineKind::Text];

    pub fn dim(&self) -> usize {
        match self {
            BaselineKind::F0 => F0_DIM,
            BaselineKind::Mfcc => MFCC_DIM,
            BaselineKind::Text => TEXT_DIM,
        }
    }

    /// Reserved layer index used for this baseline in reports.
    pub fn pseudo_layer(&self) -> i32 {
        match self {
            BaselineKind::F0 => -1,
            BaselineKind::Mfcc => -2,
            BaselineKind::Text => -3,
        }
    }

    pub fn from_pseudo_layer(layer: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.pseudo_layer() == layer)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::F0 => "f0",
            BaselineKind::Mfcc => "mfcc",
            BaselineKind::Text => "text",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineVector {
    kind: BaselineKind,
    vector: Vec<f32>,
}

impl BaselineVector {
    pub fn new(kind: BaselineKind, vector: Vec<f32>) -> Result<Self> {
        if vector.len() != kind.dim() {
            return Err(Error::Dimension {
                what: "baseline vector",
                expected: kind.dim(),
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Probe(format!("non-finite {} baseline", kind.as_str())));
        }
        Ok(BaselineVector { kind, vector })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.vector
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vector
    }
}

/// Index of the frame nearest the syllable midpoint on a `hop_s` clock.
pub fn window_center(syllable: &AlignedSyllable, hop_s: f64) -> isize {
    (syllable.midpoint_s() / hop_s).round() as isize
}

/// Values at `center - 10 ..= center + 10`, zero outside `values`.
fn window<T: Copy>(values: &[T], center: isize, zero: T) -> [T; WINDOW_LEN] {
    let mut out = [zero; WINDOW_LEN];
    for (j, slot) in out.iter_mut().enumerate() {
        let i = center - WINDOW_HALF as isize + j as isize;
        if i >= 0 && (i as usize) < values.len() {
            *slot = values[i as usize];
        }
    }
    out
}

pub fn f0_window(track: &F0Track, syllable: &AlignedSyllable) -> BaselineVector {
    let w = window(&track.values, window_center(syllable, track.hop_s), 0.0);
    BaselineVector::new(BaselineKind::F0, w.to_vec()).expect("F0 window has 21 entries")
}

pub fn mfcc_window(frames: &MfccFrames, syllable: &AlignedSyllable) -> BaselineVector {
    let center = window_center(syllable, frames.hop_s);
    let mut out = Vec::with_capacity(MFCC_DIM);
    let zero = vec![0.0f32; frames.n_coeffs];
    for j in 0..WINDOW_LEN {
        let i = center - WINDOW_HALF as isize + j as isize;
        let block = if i >= 0 && (i as usize) < frames.frames.len() {
            &frames.frames[i as usize]
        } else {
            &zero
        };
        out.extend_from_slice(block);
    }
    BaselineVector::new(BaselineKind::Mfcc, out).expect("MFCC window has 840 entries")
}

pub fn extract_f0_window(audio: &[f32], syllable: &AlignedSyllable) -> BaselineVector {
    f0_window(&F0Track::compute(audio, PitchParams::default()), syllable)
}

pub fn extract_mfcc_window(audio: &[f32], syllable: &AlignedSyllable) -> BaselineVector {
    mfcc_window(&MfccFrames::compute(audio, MfccParams::default()), syllable)
}
