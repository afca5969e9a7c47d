use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{CheckpointStep, CommandEncoder, EncoderAdapter, FrameGeometry, StubEncoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLanguage {
    Mandarin,
    English,
    Vietnamese,
    Cantonese,
    French,
    Other,
}

impl ModelLanguage {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLanguage::Mandarin => "mandarin",
            ModelLanguage::English => "english",
            ModelLanguage::Vietnamese => "vietnamese",
            ModelLanguage::Cantonese => "cantonese",
            ModelLanguage::French => "french",
            ModelLanguage::Other => "other",
        }
    }

    /// Tonality of the studied pre-training languages; `None` for `Other`.
    pub fn expected_tonality(&self) -> Option<Tonality> {
        match self {
            ModelLanguage::Mandarin | ModelLanguage::Vietnamese | ModelLanguage::Cantonese => {
                Some(Tonality::Tonal)
            }
            ModelLanguage::English | ModelLanguage::French => Some(Tonality::NonTonal),
            ModelLanguage::Other => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tonality {
    Tonal,
    NonTonal,
}

impl Tonality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tonality::Tonal => "tonal",
            Tonality::NonTonal => "non_tonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingStage {
    Pretrained,
    Finetuned,
}

impl TrainingStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainingStage::Pretrained => "pretrained",
            TrainingStage::Finetuned => "finetuned",
        }
    }
}

/// Where a model's hidden states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelLocator {
    /// Deterministic random-projection encoder. Checkpoint `step` behaves
    /// as `step / final_step` of training; step 0 carries no signal.
    Stub { seed: u64, final_step: u64 },
    /// External program writing TPRB files. `{input}`, `{output}` and
    /// `{step}` in `args` are substituted per call.
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        /// Lets the program fetch weights; otherwise hub-offline variables
        /// are set.
        #[serde(default)]
        allow_download: bool,
    },
    /// Activations must already be in the cache.
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model_id: String,
    pub language: ModelLanguage,
    pub tonality: Tonality,
    pub training_stage: TrainingStage,
    pub locator: ModelLocator,
    #[serde(default = "default_stride")]
    pub stride_s: f64,
    #[serde(default = "default_receptive")]
    pub receptive_s: f64,
    /// Hidden states including the feature-encoder output.
    #[serde(default = "default_layers")]
    pub n_layers: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Available checkpoints; the last one is the final model.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<CheckpointStep>,
}

fn default_stride() -> f64 {
    FrameGeometry::BASE.stride_s
}

fn default_receptive() -> f64 {
    FrameGeometry::BASE.receptive_s
}

fn default_layers() -> usize {
    13
}

fn default_dim() -> usize {
    768
}

fn default_checkpoints() -> Vec<CheckpointStep> {
    vec![CheckpointStep::Final]
}

impl ModelSpec {
    /// Collects every inconsistency instead of stopping at the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let id = &self.model_id;
        if id.is_empty() || id == super::BASELINE_MODEL {
            out.push(format!("model id `{id}` is reserved or empty"));
        }
        if let Some(expected) = self.language.expected_tonality() {
            if expected != self.tonality {
                out.push(format!(
                    "model `{id}`: {} is {}, not {}",
                    self.language.as_str(),
                    expected.as_str(),
                    self.tonality.as_str()
                ));
            }
        }
        let valid_geometry = self.stride_s > 0.0 && self.receptive_s >= self.stride_s;
        if !valid_geometry {
            out.push(format!("model `{id}`: stride/receptive field must satisfy 0 < stride <= receptive"));
        }
        if self.n_layers == 0 || self.dim == 0 {
            out.push(format!("model `{id}`: n_layers and dim must be positive"));
        }
        if self.checkpoints.is_empty() {
            out.push(format!("model `{id}`: no checkpoints"));
        }
        if let ModelLocator::Stub { final_step, .. } = self.locator {
            if final_step == 0 {
                out.push(format!("model `{id}`: stub final_step must be positive"));
            }
            if self.geometry() != FrameGeometry::BASE {
                out.push(format!("model `{id}`: the stub encoder has the base frame geometry"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().first() {
            None => Ok(()),
            Some(p) => Err(Error::Adapter(p.clone())),
        }
    }

    pub fn geometry(&self) -> FrameGeometry {
        FrameGeometry {
            stride_s: self.stride_s,
            receptive_s: self.receptive_s,
        }
    }

    pub fn final_checkpoint(&self) -> CheckpointStep {
        *self.checkpoints.last().unwrap_or(&CheckpointStep::Final)
    }

    /// A handle for `step`, or `None` when only cached activations exist.
    pub fn adapter(
        &self,
        step: CheckpointStep,
        offline: bool,
        scratch_dir: &Path,
    ) -> Option<Box<dyn EncoderAdapter>> {
        match &self.locator {
            ModelLocator::Stub { seed, final_step } => {
                let progress = match step {
                    CheckpointStep::Final => 1.0,
                    CheckpointStep::Step(s) => (s as f64 / *final_step as f64).min(1.0) as f32,
                };
                Some(Box::new(StubEncoder::with_shape(
                    &self.model_id,
                    step,
                    *seed,
                    progress,
                    self.n_layers,
                    self.dim,
                )))
            }
            ModelLocator::Command {
                program,
                args,
                allow_download,
            } => Some(Box::new(CommandEncoder {
                model_id: self.model_id.clone(),
                checkpoint_step: step,
                program: program.clone(),
                args: args.iter().map(|a| a.replace("{step}", &step.to_string())).collect(),
                geometry: self.geometry(),
                n_layers: self.n_layers,
                dim: self.dim,
                offline: offline || !allow_download,
                scratch_dir: scratch_dir.to_path_buf(),
            })),
            ModelLocator::Cached => None,
        }
    }
}
