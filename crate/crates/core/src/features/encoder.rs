//! Speech encoder adapters.
//!
//! An adapter turns a 16 kHz waveform into every hidden state of the model
//! (feature-encoder output first, then one entry per transformer block) and
//! declares its frame geometry, layer count and width up front.

use std::path::PathBuf;
use std::process::{Command, Stdio};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::activations::{CheckpointStep, LayerActivations};
use super::cache::read_tprb;
use super::frames::FrameGeometry;
use super::mfcc::MelAnalyzer;
use super::pitch::{F0Track, PitchParams};
use crate::error::{Error, Result};
use crate::hash::{digest_hex, seed_for};

pub trait EncoderAdapter: Send + Sync {
    fn model_id(&self) -> &str;

    fn checkpoint_step(&self) -> CheckpointStep;

    fn geometry(&self) -> FrameGeometry;

    /// Total hidden states, including the feature-encoder output.
    fn n_layers(&self) -> usize;

    fn dim(&self) -> usize;

    /// Whether concurrent forward passes on one handle are safe.
    fn reentrant(&self) -> bool {
        false
    }

    /// All hidden states, each a row-major `frames x dim` matrix.
    fn hidden_states(&self, audio: &[f32]) -> Result<Vec<Vec<f32>>>;
}

/// Runs the encoder and keeps the layers in `layer_set` (all when empty).
pub fn extract_activations(
    adapter: &dyn EncoderAdapter,
    utterance_id: &str,
    audio: &[f32],
    layer_set: &[usize],
) -> Result<LayerActivations> {
    let geometry = adapter.geometry();
    let n_frames = geometry.n_frames(audio.len())?;
    let n_layers = adapter.n_layers();
    let wanted: Vec<usize> = if layer_set.is_empty() {
        (0..n_layers).collect()
    } else {
        layer_set.to_vec()
    };
    if let Some(&max) = wanted.iter().max() {
        if max >= n_layers {
            return Err(Error::MissingLayers {
                model: adapter.model_id().to_string(),
                available: n_layers,
                requested: max + 1,
            });
        }
    }

    let mut states = adapter.hidden_states(audio)?;
    if states.len() < n_layers {
        return Err(Error::MissingLayers {
            model: adapter.model_id().to_string(),
            available: states.len(),
            requested: n_layers,
        });
    }
    let dim = adapter.dim();
    let frames_seen = states[0].len() / dim.max(1);
    // Some implementations pad differently by a frame; trust the model's count
    // as long as every layer agrees.
    if frames_seen.abs_diff(n_frames) > 1 {
        return Err(Error::Dimension {
            what: "encoder frame count",
            expected: n_frames,
            actual: frames_seen,
        });
    }
    let layers: Vec<Vec<f32>> = wanted
        .iter()
        .map(|&l| std::mem::take(&mut states[l]))
        .collect();
    let acts = LayerActivations {
        model_id: adapter.model_id().to_string(),
        checkpoint_step: adapter.checkpoint_step(),
        utterance_id: utterance_id.to_string(),
        layer_indices: wanted,
        n_frames: frames_seen,
        dim,
        layers,
        geometry,
    };
    acts.validate()?;
    Ok(acts)
}

const STUB_MELS: usize = 24;
const STUB_FRONTEND: usize = STUB_MELS + 3;

/// Deterministic stand-in encoder: log-mel and pitch descriptors per 20 ms
/// frame, randomly projected to `dim` with a tanh per pseudo-layer. Higher
/// layers see a wider temporal context.
///
/// `progress` in `[0, 1]` mimics training: at 0 the frame inputs are pure
/// pseudo-random noise (no information about the audio), at 1 they are the
/// acoustic descriptors.
#[derive(Debug, Clone)]
pub struct StubEncoder {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub seed: u64,
    pub progress: f32,
    pub n_layers: usize,
    pub dim: usize,
    projections: Vec<Vec<f32>>,
}

impl StubEncoder {
    pub fn new(model_id: &str, checkpoint_step: CheckpointStep, seed: u64, progress: f32) -> Self {
        Self::with_shape(model_id, checkpoint_step, seed, progress, 13, 768)
    }

    pub fn with_shape(
        model_id: &str,
        checkpoint_step: CheckpointStep,
        seed: u64,
        progress: f32,
        n_layers: usize,
        dim: usize,
    ) -> Self {
        let scale = 1.0 / (STUB_FRONTEND as f32).sqrt();
        let projections = (0..n_layers)
            .map(|l| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed_for(seed, &format!("layer{l}")));
                (0..dim * STUB_FRONTEND)
                    .map(|_| scale * Distribution::<f32>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        StubEncoder {
            model_id: model_id.to_string(),
            checkpoint_step,
            seed,
            progress: progress.clamp(0.0, 1.0),
            n_layers,
            dim,
            projections,
        }
    }

    fn frontend(&self, audio: &[f32], n_frames: usize) -> Vec<[f32; STUB_FRONTEND]> {
        let g = FrameGeometry::BASE;
        let (hop, rf) = (g.stride_samples(), g.receptive_samples());
        let analyzer = MelAnalyzer::new(STUB_MELS, 512, rf, 0.0, 8000.0);
        let f0 = F0Track::compute(audio, PitchParams::default());
        let log_f0 = |t: f64| {
            let v = f0.at(t);
            if v > 0.0 {
                Some((v as f64 / 100.0).log2())
            } else {
                None
            }
        };
        (0..n_frames)
            .map(|t| {
                let centre = t * hop + rf / 2;
                let mut out = [0.0f32; STUB_FRONTEND];
                let mel = analyzer.mel_power(audio, centre as isize);
                for (o, p) in out.iter_mut().zip(&mel) {
                    *o = (0.15 * ((p + 1e-8).ln() + 6.0)) as f32;
                }
                let tc = centre as f64 / crate::corpus::SAMPLE_RATE as f64;
                if let Some(lf) = log_f0(tc) {
                    out[STUB_MELS] = 2.0 * lf as f32;
                    out[STUB_MELS + 1] = 1.0;
                    if let (Some(a), Some(b)) = (log_f0(tc - 0.03), log_f0(tc + 0.03)) {
                        out[STUB_MELS + 2] = (20.0 * (b - a)) as f32;
                    }
                }
                out
            })
            .collect()
    }
}

impl EncoderAdapter for StubEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn checkpoint_step(&self) -> CheckpointStep {
        self.checkpoint_step
    }

    fn geometry(&self) -> FrameGeometry {
        FrameGeometry::BASE
    }

    fn n_layers(&self) -> usize {
        self.n_layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn reentrant(&self) -> bool {
        true
    }

    fn hidden_states(&self, audio: &[f32]) -> Result<Vec<Vec<f32>>> {
        let n_frames = FrameGeometry::BASE.n_frames(audio.len())?;
        let p = self.progress;
        let signal = if p > 0.0 {
            self.frontend(audio, n_frames)
        } else {
            vec![[0.0; STUB_FRONTEND]; n_frames]
        };
        let bytes: Vec<u8> = audio.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(seed_for(self.seed, &digest_hex(&bytes)));
        let inputs: Vec<[f32; STUB_FRONTEND]> = signal
            .iter()
            .map(|s| {
                let mut x = [0.0f32; STUB_FRONTEND];
                for (xi, si) in x.iter_mut().zip(s) {
                    let noise: f32 = StandardNormal.sample(&mut rng);
                    *xi = p * si + (1.0 - p) * noise;
                }
                x
            })
            .collect();

        Ok((0..self.n_layers)
            .map(|l| {
                let ctx = l / 3;
                let proj = &self.projections[l];
                let mut out = Vec::with_capacity(n_frames * self.dim);
                for t in 0..n_frames {
                    let lo = t.saturating_sub(ctx);
                    let hi = (t + ctx + 1).min(n_frames);
                    let mut x = [0.0f32; STUB_FRONTEND];
                    for row in &inputs[lo..hi] {
                        for (a, b) in x.iter_mut().zip(row) {
                            *a += b;
                        }
                    }
                    let inv = 1.0 / (hi - lo) as f32;
                    for a in x.iter_mut() {
                        *a *= inv;
                    }
                    for d in 0..self.dim {
                        let w = &proj[d * STUB_FRONTEND..(d + 1) * STUB_FRONTEND];
                        let z: f32 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
                        out.push(z.tanh());
                    }
                }
                out
            })
            .collect())
    }
}

/// Delegates the forward pass to an external program. `{input}` and
/// `{output}` in `args` are replaced by a temporary 16 kHz WAV path and the
/// path where the program must write a TPRB container holding every layer.
#[derive(Debug, Clone)]
pub struct CommandEncoder {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub program: String,
    pub args: Vec<String>,
    pub geometry: FrameGeometry,
    pub n_layers: usize,
    pub dim: usize,
    pub offline: bool,
    pub scratch_dir: PathBuf,
}

impl EncoderAdapter for CommandEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn checkpoint_step(&self) -> CheckpointStep {
        self.checkpoint_step
    }

    fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    fn n_layers(&self) -> usize {
        self.n_layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn hidden_states(&self, audio: &[f32]) -> Result<Vec<Vec<f32>>> {
        std::fs::create_dir_all(&self.scratch_dir).map_err(|e| Error::io(&self.scratch_dir, e))?;
        let tag = format!("{}-{}", std::process::id(), seed_for(0, &self.model_id));
        let input = self.scratch_dir.join(format!("{tag}.wav"));
        let output = self.scratch_dir.join(format!("{tag}.tprb"));
        crate::audio::write_wav(&input, audio)?;
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect();
        let mut cmd = Command::new(&self.program);
        cmd.args(&args).stdin(Stdio::null());
        if self.offline {
            cmd.env("HF_HUB_OFFLINE", "1").env("TRANSFORMERS_OFFLINE", "1");
        }
        let status = cmd
            .status()
            .map_err(|e| Error::Adapter(format!("spawning {}: {e}", self.program)))?;
        let _ = std::fs::remove_file(&input);
        if !status.success() {
            return Err(Error::Adapter(format!("{} exited with {status}", self.program)));
        }
        let bytes = std::fs::read(&output).map_err(|e| Error::io(&output, e))?;
        let _ = std::fs::remove_file(&output);
        let (header, layers) =
            read_tprb(&bytes).ok_or_else(|| Error::Adapter("unreadable TPRB output".into()))?;
        if header.dim as usize != self.dim {
            return Err(Error::Dimension {
                what: "encoder width",
                expected: self.dim,
                actual: header.dim as usize,
            });
        }
        Ok(layers)
    }
}
