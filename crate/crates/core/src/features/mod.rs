//! Probe inputs: pooled encoder activations and acoustic/text baselines.

mod activations;
pub mod baseline;
pub mod cache;
mod encoder;
mod frames;
pub mod mfcc;
pub mod pitch;
mod store;
pub mod text;

pub use activations::{pool_syllable, CheckpointStep, LayerActivations};
pub use baseline::{
    extract_f0_window, extract_mfcc_window, BaselineKind, BaselineVector, F0_DIM, MFCC_DIM,
    TEXT_DIM,
};
pub use cache::{ActivationCache, CacheKey};
pub use encoder::{extract_activations, CommandEncoder, EncoderAdapter, StubEncoder};
pub use frames::{time_to_frames, time_to_frames_with_stride, FrameGeometry};
pub use store::{
    baseline_features, extract_to_cache, pooled_layer_features, utterance_spans, AudioIndex,
    EncoderRef, ExtractStats,
};
pub use text::{extract_text_embedding, CommandTextEncoder, StubTextEncoder, TextEncoder};
