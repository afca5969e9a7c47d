use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CheckpointStep;
use crate::probe::Task;

pub const REPORT_COLUMNS: [&str; 17] = [
    "experiment",
    "corpus",
    "model_id",
    "language",
    "tonality",
    "training_stage",
    "checkpoint_step",
    "layer_index",
    "task",
    "subtask",
    "selected_alpha",
    "train_n",
    "test_n",
    "accuracy",
    "realized_test_fraction",
    "seed",
    "config_hash",
];

const ABSENT: &str = "NA";

/// One report cell. The numeric outcome fields are `None` for a cell that
/// could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub corpus: String,
    pub model_id: String,
    pub language: String,
    pub tonality: String,
    pub training_stage: String,
    pub checkpoint_step: String,
    pub layer_index: i32,
    pub task: String,
    pub subtask: String,
    pub selected_alpha: Option<f64>,
    pub train_n: Option<usize>,
    pub test_n: Option<usize>,
    pub accuracy: Option<f64>,
    pub realized_test_fraction: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

/// Sort and identity key: checkpoints order numerically, then `final`.
pub(crate) type RowKey = (String, String, String, (u8, u64), i32, String, String);

fn step_order(step: &str) -> (u8, u64) {
    match step.parse::<CheckpointStep>() {
        Ok(CheckpointStep::Step(s)) => (1, s),
        Ok(CheckpointStep::Final) => (2, 0),
        Err(_) => (0, 0),
    }
}

impl ReportRow {
    pub fn is_absent(&self) -> bool {
        self.accuracy.is_none()
    }

    pub fn task(&self) -> Option<Task> {
        Task::parse(&self.task, &self.subtask)
    }

    pub fn step(&self) -> Option<CheckpointStep> {
        self.checkpoint_step.parse().ok()
    }

    pub(crate) fn key(&self) -> RowKey {
        (
            self.experiment.clone(),
            self.corpus.clone(),
            self.model_id.clone(),
            step_order(&self.checkpoint_step),
            self.layer_index,
            self.task.clone(),
            self.subtask.clone(),
        )
    }

    fn record(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| ABSENT.to_string(), T::to_string)
        }
        vec![
            self.experiment.clone(),
            self.corpus.clone(),
            self.model_id.clone(),
            self.language.clone(),
            self.tonality.clone(),
            self.training_stage.clone(),
            self.checkpoint_step.clone(),
            self.layer_index.to_string(),
            self.task.clone(),
            self.subtask.clone(),
            opt(&self.selected_alpha),
            opt(&self.train_n),
            opt(&self.test_n),
            opt(&self.accuracy),
            opt(&self.realized_test_fraction),
            self.seed.to_string(),
            self.config_hash.clone(),
        ]
    }

    fn from_record(rec: &csv::StringRecord, line: usize) -> Result<Self> {
        let bad = |col: &str| Error::Report(format!("line {line}: bad `{col}` value"));
        fn opt<T: std::str::FromStr>(s: &str) -> std::result::Result<Option<T>, ()> {
            if s == ABSENT {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| ())
            }
        }
        if rec.len() != REPORT_COLUMNS.len() {
            return Err(Error::Report(format!(
                "line {line}: {} fields, expected {}",
                rec.len(),
                REPORT_COLUMNS.len()
            )));
        }
        Ok(ReportRow {
            experiment: rec[0].to_string(),
            corpus: rec[1].to_string(),
            model_id: rec[2].to_string(),
            language: rec[3].to_string(),
            tonality: rec[4].to_string(),
            training_stage: rec[5].to_string(),
            checkpoint_step: rec[6].to_string(),
            layer_index: rec[7].parse().map_err(|_| bad("layer_index"))?,
            task: rec[8].to_string(),
            subtask: rec[9].to_string(),
            selected_alpha: opt(&rec[10]).map_err(|_| bad("selected_alpha"))?,
            train_n: opt(&rec[11]).map_err(|_| bad("train_n"))?,
            test_n: opt(&rec[12]).map_err(|_| bad("test_n"))?,
            accuracy: opt(&rec[13]).map_err(|_| bad("accuracy"))?,
            realized_test_fraction: opt(&rec[14]).map_err(|_| bad("realized_test_fraction"))?,
            seed: rec[15].parse().map_err(|_| bad("seed"))?,
            config_hash: rec[16].to_string(),
        })
    }
}

/// Provenance of a run. Kept out of the CSV so the CSV depends only on
/// configuration and caches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub corpora: Vec<String>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub planned_cells: usize,
    pub absent_cells: Vec<String>,
}

/// Rows keyed by cell; inserting an existing cell replaces it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    rows: BTreeMap<RowKey, ReportRow>,
    pub metadata: RunMetadata,
}

impl ExperimentReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, row: ReportRow) {
        self.rows.insert(row.key(), row);
    }

    pub fn merge(&mut self, other: ExperimentReport) {
        for row in other.rows.into_values() {
            self.insert(row);
        }
        self.metadata.absent_cells.extend(other.metadata.absent_cells);
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn absent(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows().filter(|r| r.is_absent())
    }

    pub fn from_rows(rows: impl IntoIterator<Item = ReportRow>) -> Self {
        let mut r = ExperimentReport::new();
        for row in rows {
            r.insert(row);
        }
        r
    }
}

pub fn write_report_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    if report.is_empty() {
        return Err(Error::Report("refusing to write an empty report".into()));
    }
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(REPORT_COLUMNS)?;
    for row in report.rows() {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))
}

pub fn parse_report_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(Error::Report(format!("unexpected header {header:?}")));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| ReportRow::from_record(&rec?, i + 2))
        .collect()
}

/// Fine-tuned minus pretrained accuracy at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneDelta {
    pub experiment: String,
    pub corpus: String,
    pub task: String,
    pub subtask: String,
    pub pretrained_model: String,
    pub finetuned_model: String,
    pub layer_index: i32,
    pub pretrained_accuracy: f64,
    pub finetuned_accuracy: f64,
    pub delta: f64,
}

pub fn write_deltas_csv<W: Write>(deltas: &[FinetuneDelta], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in deltas {
        w.serialize(d)?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))
}
