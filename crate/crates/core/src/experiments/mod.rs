//! The four experiment families, their report format and the ordinal
//! checks run on finished reports.

pub mod analysis;
mod models;
pub mod plot;
mod report;
mod runner;

use serde::{Deserialize, Serialize};

use crate::features::CheckpointStep;
use crate::probe::Task;

pub use models::{ModelLanguage, ModelLocator, ModelSpec, Tonality, TrainingStage};
pub use report::{
    parse_report_csv, write_deltas_csv, write_report_csv, ExperimentReport, FinetuneDelta,
    ReportRow, RunMetadata, REPORT_COLUMNS,
};
pub use runner::{
    cell_count, extraction_targets, plan_experiment, run_contrasts, run_finetune_contrast, run_layer_sweep,
    run_trajectory, CellPlan, CellStore, CorpusData, Engine, RunStats, TextEncoderSpec,
};

/// Reserved `model_id` of baseline rows.
pub const BASELINE_MODEL: &str = "baseline";
/// Placeholder for fields that do not apply to a row.
pub const NOT_APPLICABLE: &str = "na";

/// One declared experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Tone (or other) probes on every layer of each model's final checkpoint.
    LayerSweep {
        name: String,
        corpus: String,
        models: Vec<String>,
        #[serde(default = "default_sweep_tasks")]
        tasks: Vec<TaskName>,
    },
    /// Pretrained vs fine-tuned, layer by layer.
    FinetuneContrast {
        name: String,
        corpus: String,
        /// `[pretrained, finetuned]` model ids.
        pairs: Vec<[String; 2]>,
        #[serde(default = "default_sweep_tasks")]
        tasks: Vec<TaskName>,
    },
    /// Every layer of every listed checkpoint of one model.
    Trajectory {
        name: String,
        corpus: String,
        model: String,
        /// Defaults to all checkpoints the model declares.
        #[serde(default)]
        steps: Vec<CheckpointStep>,
        #[serde(default = "default_trajectory_tasks")]
        tasks: Vec<TaskName>,
    },
    /// Tone pairs and consonant groups on the final checkpoints.
    Contrasts {
        name: String,
        corpus: String,
        models: Vec<String>,
    },
}

impl ExperimentSpec {
    pub fn name(&self) -> &str {
        match self {
            ExperimentSpec::LayerSweep { name, .. }
            | ExperimentSpec::FinetuneContrast { name, .. }
            | ExperimentSpec::Trajectory { name, .. }
            | ExperimentSpec::Contrasts { name, .. } => name,
        }
    }

    pub fn corpus(&self) -> &str {
        match self {
            ExperimentSpec::LayerSweep { corpus, .. }
            | ExperimentSpec::FinetuneContrast { corpus, .. }
            | ExperimentSpec::Trajectory { corpus, .. }
            | ExperimentSpec::Contrasts { corpus, .. } => corpus,
        }
    }

    pub fn model_ids(&self) -> Vec<&str> {
        match self {
            ExperimentSpec::LayerSweep { models, .. } | ExperimentSpec::Contrasts { models, .. } => {
                models.iter().map(String::as_str).collect()
            }
            ExperimentSpec::FinetuneContrast { pairs, .. } => {
                pairs.iter().flat_map(|p| p.iter().map(String::as_str)).collect()
            }
            ExperimentSpec::Trajectory { model, .. } => vec![model.as_str()],
        }
    }

    /// Probe tasks in run order.
    pub fn tasks(&self) -> Vec<Task> {
        match self {
            ExperimentSpec::LayerSweep { tasks, .. }
            | ExperimentSpec::FinetuneContrast { tasks, .. }
            | ExperimentSpec::Trajectory { tasks, .. } => tasks.iter().map(|t| t.task()).collect(),
            ExperimentSpec::Contrasts { .. } => contrast_tasks(),
        }
    }

    /// Whether baseline pseudo-layers are probed alongside the models.
    pub fn with_baselines(&self) -> bool {
        !matches!(self, ExperimentSpec::FinetuneContrast { .. })
    }
}

/// The six tone pairs followed by the three consonant groups.
pub fn contrast_tasks() -> Vec<Task> {
    let pairs = crate::probe::TONE_PAIRS.iter().map(|&(a, b)| Task::TonePair { a, b });
    let groups = crate::probe::CONSONANT_GROUPS
        .iter()
        .map(|&(group, _)| Task::ConsonantGroup { group });
    pairs.chain(groups).collect()
}

/// Base task selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Tone,
    Consonant,
}

impl TaskName {
    pub fn task(self) -> Task {
        match self {
            TaskName::Tone => Task::Tone,
            TaskName::Consonant => Task::Consonant,
        }
    }
}

fn default_sweep_tasks() -> Vec<TaskName> {
    vec![TaskName::Tone]
}

fn default_trajectory_tasks() -> Vec<TaskName> {
    vec![TaskName::Tone, TaskName::Consonant]
}
