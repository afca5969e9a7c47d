use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::frames::FrameGeometry;
use crate::corpus::AlignedSyllable;
use crate::error::{Error, Result};

/// Training step of a checkpoint, or the released final model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckpointStep {
    Step(u64),
    Final,
}

impl fmt::Display for CheckpointStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointStep::Step(s) => write!(f, "{s}"),
            CheckpointStep::Final => f.write_str("final"),
        }
    }
}

impl FromStr for CheckpointStep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "final" {
            return Ok(CheckpointStep::Final);
        }
        s.parse()
            .map(CheckpointStep::Step)
            .map_err(|_| format!("checkpoint step must be an integer or `final`, got `{s}`"))
    }
}

impl Serialize for CheckpointStep {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CheckpointStep::Step(v) => s.serialize_u64(*v),
            CheckpointStep::Final => s.serialize_str("final"),
        }
    }
}

impl<'de> Deserialize<'de> for CheckpointStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(CheckpointStep::Step(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Hidden states of one utterance: `layers[l]` is a row-major
/// `n_frames x dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub utterance_id: String,
    /// Encoder layer index of each stored layer (0 = feature encoder).
    pub layer_indices: Vec<usize>,
    pub n_frames: usize,
    pub dim: usize,
    pub layers: Vec<Vec<f32>>,
    pub geometry: FrameGeometry,
}

impl LayerActivations {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.layer_indices.len() {
            return Err(Error::Dimension {
                what: "layer count",
                expected: self.layer_indices.len(),
                actual: self.layers.len(),
            });
        }
        for layer in &self.layers {
            if layer.len() != self.n_frames * self.dim {
                return Err(Error::Dimension {
                    what: "layer matrix size",
                    expected: self.n_frames * self.dim,
                    actual: layer.len(),
                });
            }
        }
        Ok(())
    }

    pub fn frame(&self, layer: usize, t: usize) -> &[f32] {
        &self.layers[layer][t * self.dim..(t + 1) * self.dim]
    }

    /// Mean of frames in `range` for the stored layer at position `layer`.
    pub fn mean_over(&self, layer: usize, range: std::ops::Range<usize>) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        for t in range.clone() {
            for (a, &v) in acc.iter_mut().zip(self.frame(layer, t)) {
                *a += v as f64;
            }
        }
        let n = range.len().max(1) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }
}

/// Mean-pools every stored layer over the syllable's frame span. Returns
/// one vector per stored layer, in storage order.
pub fn pool_syllable(acts: &LayerActivations, syllable: &AlignedSyllable) -> Vec<Vec<f32>> {
    let range = acts
        .geometry
        .time_to_frames(syllable.start_s, syllable.end_s, acts.n_frames);
    (0..acts.layers.len())
        .map(|l| acts.mean_over(l, range.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, ToneLabel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn acts_from(frames: Vec<Vec<f32>>) -> LayerActivations {
        let dim = frames[0].len();
        LayerActivations {
            model_id: "m".into(),
            checkpoint_step: CheckpointStep::Final,
            utterance_id: "u".into(),
            layer_indices: vec![0],
            n_frames: frames.len(),
            dim,
            layers: vec![frames.concat()],
            geometry: FrameGeometry::BASE,
        }
    }

    fn syl(start: f64, end: f64) -> AlignedSyllable {
        AlignedSyllable {
            utterance_id: "u".into(),
            start_s: start,
            end_s: end,
            surface: "a".into(),
            phoneme_string: "a".into(),
            tone: ToneLabel::new(Language::Mandarin, 1).unwrap(),
            onset: String::new(),
            rime: "a".into(),
        }
    }

    #[test]
    fn constant_rows() {
        let acts = acts_from(vec![vec![0.5, -2.0]; 6]);
        assert_eq!(pool_syllable(&acts, &syl(0.0, 0.12))[0], vec![0.5, -2.0]);
    }

    #[test]
    fn two_frames() {
        let acts = acts_from(vec![vec![1.0, 2.0], vec![3.0, 6.0]]);
        assert_eq!(pool_syllable(&acts, &syl(0.0, 0.04))[0], vec![2.0, 4.0]);
    }

    #[test]
    fn brute_force_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<Vec<f32>> = (0..10)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let acts = acts_from(frames.clone());
        // frames 2, 3, 4
        let pooled = &pool_syllable(&acts, &syl(0.04, 0.10))[0];
        for d in 0..8 {
            let oracle = (frames[2][d] as f64 + frames[3][d] as f64 + frames[4][d] as f64) / 3.0;
            assert!((pooled[d] as f64 - oracle).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn linear_in_scale(scale in -5.0f32..5.0, seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<Vec<f32>> = (0..12)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let scaled: Vec<Vec<f32>> = frames.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let s = syl(0.02, 0.15);
            let a = &pool_syllable(&acts_from(frames.clone()), &s)[0];
            let b = &pool_syllable(&acts_from(scaled), &s)[0];
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x * scale - y).abs() < 1e-5);
            }
            // order of frames inside the span does not matter
            let mut permuted = frames.clone();
            permuted.swap(1, 6);
            permuted.swap(3, 5);
            let c = &pool_syllable(&acts_from(permuted), &s)[0];
            for (x, y) in a.iter().zip(c) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn checkpoint_step_text() {
        assert_eq!("final".parse::<CheckpointStep>().unwrap(), CheckpointStep::Final);
        assert_eq!("5000".parse::<CheckpointStep>().unwrap(), CheckpointStep::Step(5000));
        assert!("x".parse::<CheckpointStep>().is_err());
        assert_eq!(serde_json::to_string(&CheckpointStep::Step(3)).unwrap(), "3");
        let back: CheckpointStep = serde_json::from_str("\"final\"").unwrap();
        assert_eq!(back, CheckpointStep::Final);
    }
}
