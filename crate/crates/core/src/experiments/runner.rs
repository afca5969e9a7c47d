//! Experiment execution: extraction into the cache, shared persisted splits,
//! probe cells dispatched to the executor, and resumable cell results.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::analysis::finetune_deltas;
use super::models::ModelSpec;
use super::report::{ExperimentReport, FinetuneDelta, ReportRow, RowKey};
use super::{contrast_tasks, ExperimentSpec, BASELINE_MODEL, NOT_APPLICABLE};
use crate::corpus::{AlignedSyllable, Language};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::features::{
    baseline_features, extract_to_cache, pooled_layer_features, utterance_spans, ActivationCache,
    AudioIndex, BaselineKind, CheckpointStep, CommandTextEncoder, EncoderRef, ExtractStats,
    StubTextEncoder, TextEncoder,
};
use crate::hash::digest_hex;
use crate::matrix::FeatureMatrix;
use crate::probe::{
    train_ridge_probe, ProbeConfig, ProbeDataset, ProbeResult, SplitAssignment, SplitSpec, Task,
    TaskRows,
};

/// Text model behind the text baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TextEncoderSpec {
    Stub {
        #[serde(default)]
        seed: u64,
    },
    /// External program speaking the JSON protocol of [`CommandTextEncoder`].
    Command {
        model_id: String,
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        allow_download: bool,
    },
}

impl TextEncoderSpec {
    pub fn build(&self, offline: bool) -> Box<dyn TextEncoder> {
        match self {
            TextEncoderSpec::Stub { seed } => Box::new(StubTextEncoder::new(*seed)),
            TextEncoderSpec::Command {
                model_id,
                program,
                args,
                allow_download,
            } => Box::new(CommandTextEncoder {
                model_id: model_id.clone(),
                program: program.clone(),
                args: args.clone(),
                offline: offline || !allow_download,
            }),
        }
    }
}

/// An ingested corpus ready for probing. `syllables` is the full table,
/// neutral tones included, sorted by utterance.
pub struct CorpusData {
    pub id: String,
    pub language: Language,
    pub syllables: Vec<AlignedSyllable>,
    pub audio: AudioIndex,
}

impl CorpusData {
    pub fn utterances(&self) -> Vec<String> {
        utterance_spans(&self.syllables).into_iter().map(|(u, _)| u).collect()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Finished cells of one configuration, one JSON file per cell, so an
/// interrupted run resumes where it stopped.
#[derive(Debug, Clone)]
pub struct CellStore {
    dir: PathBuf,
}

impl CellStore {
    pub fn new(root: &Path, config_hash: &str) -> Self {
        CellStore {
            dir: root.join(config_hash),
        }
    }

    fn path(&self, key: &RowKey) -> PathBuf {
        let name = &digest_hex(format!("{key:?}").as_bytes())[..32];
        self.dir.join(format!("{name}.json"))
    }

    /// A completed (non-absent) row for the cell of `template`.
    pub fn get(&self, template: &ReportRow) -> Option<ReportRow> {
        let bytes = std::fs::read(self.path(&template.key())).ok()?;
        let row: ReportRow = serde_json::from_slice(&bytes).ok()?;
        (row.key() == template.key() && !row.is_absent()).then_some(row)
    }

    pub fn put(&self, row: &ReportRow) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(&row.key());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        serde_json::to_writer(tmp.as_file_mut(), row)?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir).map(|d| d.count()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counters of one engine's work, for logs and resume checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub extraction: ExtractStats,
    pub probes_trained: usize,
    pub cells_resumed: usize,
}

struct TaskData {
    rows: TaskRows,
    split: SplitAssignment,
}

type Shared<T> = Arc<std::result::Result<T, String>>;
type Memo<K, V> = Mutex<HashMap<K, Shared<V>>>;

/// Shared state of a run: caches, probe settings and memoised splits and
/// baseline features.
pub struct Engine {
    pub cache: ActivationCache,
    pub probe: ProbeConfig,
    pub test_fraction: f64,
    pub config_hash: String,
    /// Pooling, baselines and probe cells.
    pub probe_par: Parallelism,
    /// Encoder forward passes.
    pub extract_par: Parallelism,
    pub text_encoder: Option<Box<dyn TextEncoder>>,
    pub cells: Option<CellStore>,
    pub splits_dir: Option<PathBuf>,
    pub offline: bool,
    pub scratch_dir: PathBuf,
    /// Layers pooled into memory at once.
    pub layer_batch: usize,
    tasks: Memo<(String, Task), Arc<TaskData>>,
    baselines: Memo<(String, BaselineKind), Arc<FeatureMatrix>>,
    baseline_results: Memo<(String, BaselineKind, Task), ProbeResult>,
    stats: Mutex<RunStats>,
}

/// Who a row is about.
#[derive(Clone, Copy)]
enum Subject<'a> {
    Model(&'a ModelSpec, CheckpointStep),
    Baseline,
}

impl Engine {
    pub fn new(cache: ActivationCache, config_hash: &str, seed: u64) -> Self {
        Engine {
            cache,
            probe: ProbeConfig {
                seed,
                ..ProbeConfig::default()
            },
            test_fraction: crate::probe::DEFAULT_TEST_FRACTION,
            config_hash: config_hash.to_string(),
            probe_par: Parallelism::default(),
            extract_par: Parallelism::Sequential,
            text_encoder: None,
            cells: None,
            splits_dir: None,
            offline: true,
            scratch_dir: std::env::temp_dir(),
            layer_batch: 4,
            tasks: Mutex::default(),
            baselines: Mutex::default(),
            baseline_results: Mutex::default(),
            stats: Mutex::default(),
        }
    }

    pub fn stats(&self) -> RunStats {
        self.stats.lock().expect("stats lock").clone()
    }

    fn seed(&self) -> u64 {
        self.probe.seed
    }

    pub fn split_path(&self, corpus: &str, task: Task) -> Option<PathBuf> {
        self.splits_dir.as_ref().map(|d| {
            d.join(format!("{}_{}_{}.json", sanitize(corpus), task.base().name(), self.seed()))
        })
    }

    fn load_or_make_split(&self, corpus: &str, rows: &TaskRows) -> Result<SplitAssignment> {
        let spec = SplitSpec::new(rows.task.exclusion_key(), self.test_fraction, self.seed())?;
        let path = self.split_path(corpus, rows.task);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            match SplitAssignment::load(p) {
                Ok(s) if s.spec == spec && split_fits(&s, rows) => return Ok(s),
                Ok(_) => warn!("{}: persisted split does not match this corpus; redrawing", p.display()),
                Err(e) => warn!("{}: {e}; redrawing", p.display()),
            }
        }
        let split = rows.split(spec)?;
        if let Some(p) = path {
            split.save(&p)?;
        }
        Ok(split)
    }

    fn task_data(&self, corpus: &CorpusData, task: Task) -> Shared<Arc<TaskData>> {
        let key = (corpus.id.clone(), task);
        if let Some(d) = self.tasks.lock().expect("task lock").get(&key) {
            return d.clone();
        }
        let computed = if task.base() == task {
            TaskRows::build(task, &corpus.syllables)
                .and_then(|rows| {
                    let split = self.load_or_make_split(&corpus.id, &rows)?;
                    info!(
                        "{} {}: train {} / test {} (test fraction {:.4})",
                        corpus.id,
                        task,
                        split.train_n,
                        split.test_n,
                        split.realized_test_fraction()
                    );
                    Ok(Arc::new(TaskData { rows, split }))
                })
                .map_err(|e| e.to_string())
        } else {
            match &*self.task_data(corpus, task.base()) {
                Ok(base) => base
                    .rows
                    .restrict(task)
                    .map(|rows| {
                        Arc::new(TaskData {
                            rows,
                            split: base.split.clone(),
                        })
                    })
                    .map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            }
        };
        let shared = Arc::new(computed);
        self.tasks.lock().expect("task lock").insert(key, shared.clone());
        shared
    }

    /// The persisted split of a base task, computing it if needed.
    pub fn split_for(&self, corpus: &CorpusData, task: Task) -> Result<(TaskRows, SplitAssignment)> {
        match &*self.task_data(corpus, task) {
            Ok(d) => Ok((d.rows.clone(), d.split.clone())),
            Err(e) => Err(Error::Split(e.clone())),
        }
    }

    fn probe_cell(&self, features: &FeatureMatrix, data: &Shared<Arc<TaskData>>) -> std::result::Result<ProbeResult, String> {
        let data = data.as_ref().as_ref().map_err(Clone::clone)?;
        let ds = ProbeDataset::new(features, &data.rows, &data.split).map_err(|e| e.to_string())?;
        let r = train_ridge_probe(&ds, &self.probe).map_err(|e| e.to_string());
        self.stats.lock().expect("stats lock").probes_trained += 1;
        r
    }

    fn row(
        &self,
        experiment: &str,
        corpus: &str,
        subject: Subject<'_>,
        layer: i32,
        task: Task,
        result: Option<&ProbeResult>,
    ) -> ReportRow {
        let na = || NOT_APPLICABLE.to_string();
        let (model_id, language, tonality, stage, step) = match subject {
            Subject::Model(m, s) => (
                m.model_id.clone(),
                m.language.as_str().to_string(),
                m.tonality.as_str().to_string(),
                m.training_stage.as_str().to_string(),
                s.to_string(),
            ),
            Subject::Baseline => (BASELINE_MODEL.to_string(), na(), na(), na(), na()),
        };
        ReportRow {
            experiment: experiment.to_string(),
            corpus: corpus.to_string(),
            model_id,
            language,
            tonality,
            training_stage: stage,
            checkpoint_step: step,
            layer_index: layer,
            task: task.name().to_string(),
            subtask: task.subtask(),
            selected_alpha: result.map(|r| r.selected_alpha),
            train_n: result.map(|r| r.train_n),
            test_n: result.map(|r| r.test_n),
            accuracy: result.map(|r| r.accuracy),
            realized_test_fraction: result.map(|r| r.test_n as f64 / (r.train_n + r.test_n) as f64),
            seed: self.seed(),
            config_hash: self.config_hash.clone(),
        }
    }

    fn resumed(&self, template: &ReportRow) -> Option<ReportRow> {
        let row = self.cells.as_ref()?.get(template)?;
        self.stats.lock().expect("stats lock").cells_resumed += 1;
        Some(row)
    }

    fn record(&self, report: &mut ExperimentReport, row: ReportRow, outcome: std::result::Result<(), String>) -> Result<()> {
        match outcome {
            Ok(()) => {
                if let Some(cells) = &self.cells {
                    cells.put(&row)?;
                }
            }
            Err(reason) => {
                let cell = format!(
                    "{}/{}@{}/layer {}/{}/{}",
                    row.experiment, row.model_id, row.checkpoint_step, row.layer_index, row.task, row.subtask
                );
                warn!("absent cell {cell}: {reason}");
                report.metadata.absent_cells.push(format!("{cell}: {reason}"));
            }
        }
        report.insert(row);
        Ok(())
    }

    fn baseline_matrix(&self, corpus: &CorpusData, kind: BaselineKind) -> Shared<Arc<FeatureMatrix>> {
        let key = (corpus.id.clone(), kind);
        if let Some(m) = self.baselines.lock().expect("baseline lock").get(&key) {
            return m.clone();
        }
        let audio = |u: &str| corpus.audio.path(u);
        let computed = if kind == BaselineKind::Text && self.text_encoder.is_none() {
            Err("no text encoder configured".to_string())
        } else {
            baseline_features(kind, &corpus.syllables, &audio, self.text_encoder.as_deref(), self.probe_par)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        };
        let shared = Arc::new(computed);
        self.baselines.lock().expect("baseline lock").insert(key, shared.clone());
        shared
    }

    fn baseline_result(&self, corpus: &CorpusData, kind: BaselineKind, task: Task) -> Shared<ProbeResult> {
        let key = (corpus.id.clone(), kind, task);
        if let Some(r) = self.baseline_results.lock().expect("baseline lock").get(&key) {
            return r.clone();
        }
        let data = self.task_data(corpus, task);
        let computed = match &*self.baseline_matrix(corpus, kind) {
            Ok(m) => self.probe_cell(m, &data),
            Err(e) => Err(e.clone()),
        };
        let shared = Arc::new(computed);
        self.baseline_results
            .lock()
            .expect("baseline lock")
            .insert(key, shared.clone());
        shared
    }

    fn baseline_rows(&self, experiment: &str, corpus: &CorpusData, tasks: &[Task], report: &mut ExperimentReport) -> Result<()> {
        for kind in BaselineKind::ALL {
            let todo: Vec<Task> = tasks
                .iter()
                .copied()
                .filter(|&t| {
                    let tmpl = self.row(experiment, &corpus.id, Subject::Baseline, kind.pseudo_layer(), t, None);
                    match self.resumed(&tmpl) {
                        Some(done) => {
                            report.insert(done);
                            false
                        }
                        None => true,
                    }
                })
                .collect();
            if todo.is_empty() {
                continue;
            }
            for &t in &todo {
                self.task_data(corpus, t);
            }
            let results = self.probe_par.map(&todo, |&t| self.baseline_result(corpus, kind, t));
            for (t, r) in todo.into_iter().zip(results) {
                let res = r.as_ref().as_ref().ok();
                let row = self.row(experiment, &corpus.id, Subject::Baseline, kind.pseudo_layer(), t, res);
                self.record(report, row, r.as_ref().as_ref().map(|_| ()).map_err(Clone::clone))?;
            }
        }
        Ok(())
    }

    /// Caches every utterance's activations for one checkpoint.
    pub fn extract(&self, corpus: &CorpusData, model: &ModelSpec, step: CheckpointStep) -> Result<ExtractStats> {
        let encoder = encoder_ref(model, step);
        let adapter = model.adapter(step, self.offline, &self.scratch_dir);
        let audio = |u: &str| corpus.audio.path(u);
        let s = extract_to_cache(&encoder, adapter.as_deref(), &corpus.utterances(), &audio, &self.cache, self.extract_par)?;
        let mut stats = self.stats.lock().expect("stats lock");
        stats.extraction.cache_hits += s.cache_hits;
        stats.extraction.extracted += s.extracted;
        Ok(s)
    }

    fn model_rows(
        &self,
        experiment: &str,
        corpus: &CorpusData,
        model: &ModelSpec,
        step: CheckpointStep,
        tasks: &[Task],
        report: &mut ExperimentReport,
    ) -> Result<()> {
        let subject = Subject::Model(model, step);
        let mut todo: Vec<(usize, Task)> = Vec::new();
        for layer in 0..model.n_layers {
            for &t in tasks {
                let tmpl = self.row(experiment, &corpus.id, subject, layer as i32, t, None);
                match self.resumed(&tmpl) {
                    Some(done) => report.insert(done),
                    None => todo.push((layer, t)),
                }
            }
        }
        if todo.is_empty() {
            return Ok(());
        }
        let fail_all = |report: &mut ExperimentReport, cells: &[(usize, Task)], reason: &str| -> Result<()> {
            for &(l, t) in cells {
                let row = self.row(experiment, &corpus.id, subject, l as i32, t, None);
                self.record(report, row, Err(reason.to_string()))?;
            }
            Ok(())
        };

        if let Err(e) = self.extract(corpus, model, step) {
            return fail_all(report, &todo, &e.to_string());
        }
        let encoder = encoder_ref(model, step);

        let task_data: BTreeMap<Task, Shared<Arc<TaskData>>> =
            tasks.iter().map(|&t| (t, self.task_data(corpus, t))).collect();
        let layers: Vec<usize> = todo.iter().map(|c| c.0).collect::<BTreeSet<_>>().into_iter().collect();
        for batch in layers.chunks(self.layer_batch.max(1)) {
            let cells: Vec<(usize, usize, Task)> = todo
                .iter()
                .filter_map(|&(l, t)| batch.iter().position(|&b| b == l).map(|i| (i, l, t)))
                .collect();
            let feats = match pooled_layer_features(&encoder, &corpus.syllables, &self.cache, batch, self.probe_par) {
                Ok(f) => f,
                Err(e) => {
                    let plain: Vec<(usize, Task)> = cells.iter().map(|&(_, l, t)| (l, t)).collect();
                    fail_all(report, &plain, &e.to_string())?;
                    continue;
                }
            };
            let results = self
                .probe_par
                .map(&cells, |&(i, _, t)| self.probe_cell(&feats[i], &task_data[&t]));
            for ((_, l, t), r) in cells.into_iter().zip(results) {
                let row = self.row(experiment, &corpus.id, subject, l as i32, t, r.as_ref().ok());
                self.record(report, row, r.map(|_| ()))?;
            }
        }
        Ok(())
    }

    /// Runs one declared experiment. Fine-tuning deltas are empty for the
    /// other kinds.
    pub fn run(
        &self,
        spec: &ExperimentSpec,
        models: &BTreeMap<String, ModelSpec>,
        corpus: &CorpusData,
    ) -> Result<(ExperimentReport, Vec<FinetuneDelta>)> {
        let model = |id: &str| {
            models
                .get(id)
                .ok_or_else(|| Error::Report(format!("experiment `{}` names unknown model `{id}`", spec.name())))
        };
        let name = spec.name();
        match spec {
            ExperimentSpec::LayerSweep { models: ids, .. } => {
                let ms = ids.iter().map(|m| model(m)).collect::<Result<Vec<_>>>()?;
                Ok((run_layer_sweep(self, name, &ms, corpus, &spec.tasks())?, Vec::new()))
            }
            ExperimentSpec::FinetuneContrast { pairs, .. } => {
                let ps = pairs
                    .iter()
                    .map(|[a, b]| Ok((model(a)?, model(b)?)))
                    .collect::<Result<Vec<_>>>()?;
                run_finetune_contrast(self, name, &ps, corpus, &spec.tasks())
            }
            ExperimentSpec::Trajectory { model: id, steps, .. } => {
                let m = model(id)?;
                let steps = if steps.is_empty() { m.checkpoints.clone() } else { steps.clone() };
                Ok((run_trajectory(self, name, m, &steps, corpus, &spec.tasks())?, Vec::new()))
            }
            ExperimentSpec::Contrasts { models: ids, .. } => {
                let ms = ids.iter().map(|m| model(m)).collect::<Result<Vec<_>>>()?;
                Ok((run_contrasts(self, name, &ms, corpus)?, Vec::new()))
            }
        }
    }
}

fn encoder_ref(model: &ModelSpec, step: CheckpointStep) -> EncoderRef {
    EncoderRef {
        model_id: model.model_id.clone(),
        checkpoint_step: step,
        geometry: model.geometry(),
        n_layers: model.n_layers,
        dim: model.dim,
    }
}

fn split_fits(split: &SplitAssignment, rows: &TaskRows) -> bool {
    let Ok(sides) = split.sides_for(&rows.group_keys) else {
        return false;
    };
    let test = sides.iter().filter(|s| **s == crate::probe::Side::Test).count();
    test == split.test_n && rows.len() == split.train_n + split.test_n
}

/// Every layer of each model's final checkpoint, plus baselines.
pub fn run_layer_sweep(
    engine: &Engine,
    name: &str,
    models: &[&ModelSpec],
    corpus: &CorpusData,
    tasks: &[Task],
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    engine.baseline_rows(name, corpus, tasks, &mut report)?;
    for m in models {
        engine.model_rows(name, corpus, m, m.final_checkpoint(), tasks, &mut report)?;
    }
    Ok(report)
}

/// Pretrained and fine-tuned models layer by layer, with per-layer deltas.
pub fn run_finetune_contrast(
    engine: &Engine,
    name: &str,
    pairs: &[(&ModelSpec, &ModelSpec)],
    corpus: &CorpusData,
    tasks: &[Task],
) -> Result<(ExperimentReport, Vec<FinetuneDelta>)> {
    let mut report = ExperimentReport::new();
    for (pre, ft) in pairs {
        engine.model_rows(name, corpus, pre, pre.final_checkpoint(), tasks, &mut report)?;
        engine.model_rows(name, corpus, ft, ft.final_checkpoint(), tasks, &mut report)?;
    }
    let mut deltas = Vec::new();
    for (pre, ft) in pairs {
        for &t in tasks {
            deltas.extend(finetune_deltas(&report, name, &pre.model_id, &ft.model_id, t));
        }
    }
    Ok((report, deltas))
}

/// Every layer at every listed checkpoint, plus baselines.
pub fn run_trajectory(
    engine: &Engine,
    name: &str,
    model: &ModelSpec,
    steps: &[CheckpointStep],
    corpus: &CorpusData,
    tasks: &[Task],
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    engine.baseline_rows(name, corpus, tasks, &mut report)?;
    for &s in steps {
        engine.model_rows(name, corpus, model, s, tasks, &mut report)?;
    }
    Ok(report)
}

/// Tone pairs and consonant groups on every layer of the final checkpoints;
/// the best layer per (model, task) is read off the report.
pub fn run_contrasts(
    engine: &Engine,
    name: &str,
    models: &[&ModelSpec],
    corpus: &CorpusData,
) -> Result<ExperimentReport> {
    let tasks = contrast_tasks();
    let mut report = ExperimentReport::new();
    engine.baseline_rows(name, corpus, &tasks, &mut report)?;
    for m in models {
        engine.model_rows(name, corpus, m, m.final_checkpoint(), &tasks, &mut report)?;
    }
    Ok(report)
}

/// Work implied by one experiment, known before anything runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellPlan {
    pub experiment: String,
    pub model_probes: usize,
    pub baseline_probes: usize,
    /// (model, checkpoint) pairs whose activations must be cached.
    pub extraction_passes: usize,
}

impl CellPlan {
    pub fn probes(&self) -> usize {
        self.model_probes + self.baseline_probes
    }
}

/// The (model, checkpoint) pairs an experiment reads activations of, in
/// the order it visits them.
pub fn extraction_targets<'m>(
    spec: &ExperimentSpec,
    models: &'m BTreeMap<String, ModelSpec>,
) -> Result<Vec<(&'m ModelSpec, CheckpointStep)>> {
    let mut out = Vec::new();
    for id in spec.model_ids() {
        let m = models
            .get(id)
            .ok_or_else(|| Error::Report(format!("experiment `{}` names unknown model `{id}`", spec.name())))?;
        match spec {
            ExperimentSpec::Trajectory { steps, .. } if !steps.is_empty() => {
                out.extend(steps.iter().map(|&s| (m, s)))
            }
            ExperimentSpec::Trajectory { .. } => out.extend(m.checkpoints.iter().map(|&s| (m, s))),
            _ => out.push((m, m.final_checkpoint())),
        }
    }
    Ok(out)
}

pub fn plan_experiment(spec: &ExperimentSpec, models: &BTreeMap<String, ModelSpec>) -> Result<CellPlan> {
    let tasks = spec.tasks().len();
    let targets = extraction_targets(spec, models)?;
    let model_probes = targets.iter().map(|(m, _)| m.n_layers * tasks).sum();
    let baseline_probes = if spec.with_baselines() {
        BaselineKind::ALL.len() * tasks
    } else {
        0
    };
    Ok(CellPlan {
        experiment: spec.name().to_string(),
        model_probes,
        baseline_probes,
        extraction_passes: targets.len(),
    })
}

pub fn cell_count(plans: &[CellPlan]) -> usize {
    plans.iter().map(CellPlan::probes).sum()
}
