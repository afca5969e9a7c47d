//! The pipeline stages. Each stage reads the artifacts of the previous one
//! from the output directory, so any stage can be re-run on its own.
//!
//! Output layout:
//!
//! ```text
//! <output_dir>/ingest/<corpus>.tsv          syllable table
//! <output_dir>/ingest/<corpus>.audio.json   utterance -> wav path
//! <output_dir>/ingest/<corpus>.report.json  skip/filter accounting and split sizes
//! <output_dir>/parts/<experiment>.csv       probe results of one experiment
//! <output_dir>/parts/<experiment>.absent.json
//! <output_dir>/report.csv
//! <output_dir>/finetune_deltas.csv
//! <output_dir>/run_metadata.json
//! <output_dir>/checks.txt
//! <output_dir>/plots/<experiment>.svg
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use toneprobe::corpus::{load_corpus, read_syllable_table, write_syllable_table, CorpusManifest, IngestReport};
use toneprobe::experiments::analysis::{
    check_baseline_ordering, check_final_drop, check_finetune_signs, check_group_gaps,
    check_pair_ranking, finetune_deltas, Verdict,
};
use toneprobe::experiments::plot::{layer_plot, step_plot};
use toneprobe::experiments::{
    cell_count, extraction_targets, parse_report_csv, plan_experiment, write_deltas_csv,
    write_report_csv, CellPlan, CellStore, CorpusData, Engine, ExperimentReport, ExperimentSpec,
    FinetuneDelta, ModelSpec, RunMetadata, Tonality,
};
use toneprobe::features::{ActivationCache, AudioIndex};
use toneprobe::probe::{ProbeConfig, Task};
use toneprobe::Parallelism;

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Core(#[from] toneprobe::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Missing(String),
}

pub type StageResult<T> = Result<T, StageError>;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> StageResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| StageError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> StageResult<T> {
    let bytes = fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StageError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Execution settings that come from the command line.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub offline: bool,
    pub probe_par: Parallelism,
}

/// Split sizes of one base task after ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub task: String,
    pub train_n: usize,
    pub test_n: usize,
    pub realized_test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIngest {
    pub ingest: IngestReport,
    pub subsample_fraction: f64,
    pub splits: Vec<SplitSummary>,
}

/// Paths of every artifact under an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn table(&self, corpus: &str) -> PathBuf {
        self.root.join("ingest").join(format!("{corpus}.tsv"))
    }

    pub fn audio_index(&self, corpus: &str) -> PathBuf {
        self.root.join("ingest").join(format!("{corpus}.audio.json"))
    }

    pub fn ingest_report(&self, corpus: &str) -> PathBuf {
        self.root.join("ingest").join(format!("{corpus}.report.json"))
    }

    pub fn part(&self, experiment: &str) -> PathBuf {
        self.root.join("parts").join(format!("{experiment}.csv"))
    }

    pub fn part_absent(&self, experiment: &str) -> PathBuf {
        self.root.join("parts").join(format!("{experiment}.absent.json"))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    pub fn deltas(&self) -> PathBuf {
        self.root.join("finetune_deltas.csv")
    }

    pub fn metadata(&self) -> PathBuf {
        self.root.join("run_metadata.json")
    }

    pub fn checks(&self) -> PathBuf {
        self.root.join("checks.txt")
    }

    pub fn plot(&self, experiment: &str) -> PathBuf {
        self.root.join("plots").join(format!("{experiment}.svg"))
    }
}

pub struct Pipeline {
    pub config: RunConfig,
    pub hash: String,
    pub layout: Layout,
    pub engine: Engine,
}

impl Pipeline {
    pub fn new(config: RunConfig, opts: RunOptions) -> Self {
        let hash = config.config_hash();
        let layout = Layout::new(&config.output_dir);
        let mut engine = Engine::new(ActivationCache::new(config.cache_dir.join("activations")), &hash, config.seed);
        engine.probe = ProbeConfig {
            alphas: config.alpha_grid.clone(),
            folds: config.folds,
            center: config.center,
            seed: config.seed,
        };
        engine.test_fraction = config.test_fraction;
        engine.probe_par = opts.probe_par;
        engine.extract_par = Parallelism::Sequential;
        engine.offline = opts.offline;
        engine.text_encoder = Some(config.text_encoder.build(opts.offline));
        engine.cells = Some(CellStore::new(&config.cache_dir.join("cells"), &hash));
        engine.splits_dir = Some(config.cache_dir.join("splits"));
        engine.scratch_dir = config.cache_dir.join("scratch");
        Pipeline {
            config,
            hash,
            layout,
            engine,
        }
    }

    pub fn plans(&self) -> StageResult<Vec<CellPlan>> {
        let models = self.config.model_map();
        Ok(self
            .config
            .experiments
            .iter()
            .map(|e| plan_experiment(e, &models))
            .collect::<toneprobe::Result<_>>()?)
    }

    /// Parses every used corpus and writes its syllable table, audio index
    /// and ingest report.
    pub fn ingest(&self) -> StageResult<Vec<CorpusIngest>> {
        let mut out = Vec::new();
        for layout in self.config.used_corpora() {
            let mut manifest = CorpusManifest::discover(layout)?;
            manifest.subsample(self.config.subsample_fraction, self.config.seed);
            let ingested = load_corpus(&manifest, self.engine.probe_par)?;
            let r = &ingested.report;
            info!(
                "{}: {} of {} utterances, {} syllables ({} neutral), {} skipped",
                layout.id,
                r.utterances_emitted,
                r.utterances,
                r.emitted_syllables,
                r.neutral_tone_syllables,
                r.skipped_syllables()
            );

            let table = self.layout.table(&layout.id);
            fs::create_dir_all(table.parent().expect("ingest dir")).map_err(io(&table))?;
            let file = fs::File::create(&table).map_err(io(&table))?;
            write_syllable_table(BufWriter::new(file), &ingested.syllables)?;
            let audio: BTreeMap<&str, &Path> = manifest
                .entries
                .iter()
                .map(|e| (e.utterance_id.as_str(), e.audio.as_path()))
                .collect();
            write_json(&self.layout.audio_index(&layout.id), &audio)?;

            let corpus = self.load_corpus_data(&layout.id)?;
            let mut splits = Vec::new();
            for task in [Task::Tone, Task::Consonant] {
                if task == Task::Consonant && layout.language != toneprobe::corpus::Language::Mandarin {
                    continue;
                }
                match self.engine.split_for(&corpus, task) {
                    Ok((_, s)) => {
                        info!("{} {task}: train {} test {}", layout.id, s.train_n, s.test_n);
                        splits.push(SplitSummary {
                            task: task.name().into(),
                            train_n: s.train_n,
                            test_n: s.test_n,
                            realized_test_fraction: s.realized_test_fraction(),
                        });
                    }
                    Err(e) => warn!("{} {task}: no split: {e}", layout.id),
                }
            }
            let summary = CorpusIngest {
                ingest: ingested.report,
                subsample_fraction: self.config.subsample_fraction,
                splits,
            };
            write_json(&self.layout.ingest_report(&layout.id), &summary)?;
            out.push(summary);
        }
        Ok(out)
    }

    /// Reads back what `ingest` wrote for one corpus.
    pub fn load_corpus_data(&self, id: &str) -> StageResult<CorpusData> {
        let layout = self
            .config
            .corpus(id)
            .ok_or_else(|| StageError::Missing(format!("corpus `{id}` is not declared")))?;
        let table = self.layout.table(id);
        if !table.exists() {
            return Err(StageError::Missing(format!(
                "{} does not exist; run the ingest stage first",
                table.display()
            )));
        }
        let file = fs::File::open(&table).map_err(io(&table))?;
        let syllables = read_syllable_table(std::io::BufReader::new(file), layout.language)?;
        let audio: HashMap<String, PathBuf> = read_json(&self.layout.audio_index(id))?;
        Ok(CorpusData {
            id: id.to_string(),
            language: layout.language,
            syllables,
            audio: AudioIndex::new(audio, &layout.audio_root),
        })
    }

    fn corpora(&self) -> StageResult<BTreeMap<String, CorpusData>> {
        self.config
            .used_corpora()
            .into_iter()
            .map(|c| Ok((c.id.clone(), self.load_corpus_data(&c.id)?)))
            .collect()
    }

    /// Fills the activation cache for every checkpoint an experiment reads.
    /// Returns the failures; the other checkpoints are still extracted.
    pub fn extract(&self) -> StageResult<Vec<String>> {
        let corpora = self.corpora()?;
        let models = self.config.model_map();
        let mut done = std::collections::BTreeSet::new();
        let mut failures = Vec::new();
        for e in &self.config.experiments {
            let corpus = &corpora[e.corpus()];
            for (m, step) in extraction_targets(e, &models)? {
                if !done.insert((corpus.id.clone(), m.model_id.clone(), step)) {
                    continue;
                }
                match self.engine.extract(corpus, m, step) {
                    Ok(s) => info!("{} @ {step}: {} extracted, {} cached", m.model_id, s.extracted, s.cache_hits),
                    Err(err) => {
                        warn!("{} @ {step}: {err}", m.model_id);
                        failures.push(format!("{} @ {step}: {err}", m.model_id));
                    }
                }
            }
        }
        Ok(failures)
    }

    /// Runs every experiment, resuming completed cells, and writes one part
    /// per experiment.
    pub fn probe(&self) -> StageResult<()> {
        let corpora = self.corpora()?;
        let models = self.config.model_map();
        for e in &self.config.experiments {
            let (report, _) = self.engine.run(e, &models, &corpora[e.corpus()])?;
            let path = self.layout.part(e.name());
            fs::create_dir_all(path.parent().expect("parts dir")).map_err(io(&path))?;
            write_report_csv(&report, fs::File::create(&path).map_err(io(&path))?)?;
            write_json(&self.layout.part_absent(e.name()), &report.metadata.absent_cells)?;
            info!(
                "{}: {} rows, {} absent",
                e.name(),
                report.len(),
                report.metadata.absent_cells.len()
            );
        }
        let s = self.engine.stats();
        info!(
            "probes trained {}, cells resumed {}, utterances extracted {}",
            s.probes_trained, s.cells_resumed, s.extraction.extracted
        );
        Ok(())
    }

    /// Merges the parts into the final report, deltas, plots, ordinal
    /// checks and run metadata.
    pub fn report(&self, started_unix_s: u64) -> StageResult<ExperimentReport> {
        let models = self.config.model_map();
        let mut report = ExperimentReport::new();
        let mut absent = Vec::new();
        for e in &self.config.experiments {
            let path = self.layout.part(e.name());
            if !path.exists() {
                return Err(StageError::Missing(format!(
                    "{} does not exist; run the probe stage first",
                    path.display()
                )));
            }
            let rows = parse_report_csv(fs::File::open(&path).map_err(io(&path))?)?;
            report.merge(ExperimentReport::from_rows(rows));
            let absent_path = self.layout.part_absent(e.name());
            if absent_path.exists() {
                absent.extend(read_json::<Vec<String>>(&absent_path)?);
            }
        }
        for r in report.absent() {
            let cell = format!(
                "{}/{}@{}/layer {}/{}/{}",
                r.experiment, r.model_id, r.checkpoint_step, r.layer_index, r.task, r.subtask
            );
            if !absent.iter().any(|a| a.starts_with(&cell)) {
                absent.push(cell);
            }
        }

        let deltas = self.deltas(&report);
        let plans = self.plans()?;
        report.metadata = RunMetadata {
            config_hash: self.hash.clone(),
            seed: self.config.seed,
            corpora: self.config.used_corpora().iter().map(|c| c.id.clone()).collect(),
            started_unix_s,
            finished_unix_s: unix_now(),
            planned_cells: cell_count(&plans),
            absent_cells: absent,
        };

        fs::create_dir_all(&self.layout.root).map_err(io(&self.layout.root))?;
        let path = self.layout.report();
        write_report_csv(&report, fs::File::create(&path).map_err(io(&path))?)?;
        let path = self.layout.deltas();
        write_deltas_csv(&deltas, fs::File::create(&path).map_err(io(&path))?)?;
        write_json(&self.layout.metadata(), &report.metadata)?;

        for e in &self.config.experiments {
            let own = only_experiment(&report, e.name());
            let svg = match e {
                ExperimentSpec::Trajectory { .. } => step_plot(&own, e.name()),
                _ => layer_plot(&own, e.name()),
            };
            if let Some(svg) = svg {
                let path = self.layout.plot(e.name());
                fs::create_dir_all(path.parent().expect("plot dir")).map_err(io(&path))?;
                fs::write(&path, svg).map_err(io(&path))?;
            }
        }

        let checks = ordinal_checks(&report, &deltas, &self.config.experiments, &models);
        let mut text = String::new();
        for (name, v) in &checks {
            text.push_str(&format!("{} {name}: {}\n", if v.pass { "PASS" } else { "FAIL" }, v.detail));
        }
        fs::write(self.layout.checks(), text).map_err(io(&self.layout.checks()))?;
        Ok(report)
    }

    fn deltas(&self, report: &ExperimentReport) -> Vec<FinetuneDelta> {
        let mut out = Vec::new();
        for e in &self.config.experiments {
            if let ExperimentSpec::FinetuneContrast { name, pairs, .. } = e {
                for [pre, ft] in pairs {
                    for t in e.tasks() {
                        out.extend(finetune_deltas(report, name, pre, ft, t));
                    }
                }
            }
        }
        out
    }

    /// All stages in order. Partial results are written even when cells
    /// are absent.
    pub fn run(&self) -> StageResult<ExperimentReport> {
        let started = unix_now();
        self.ingest()?;
        let failures = self.extract()?;
        if !failures.is_empty() {
            warn!("{} checkpoints could not be extracted; their cells will be absent", failures.len());
        }
        self.probe()?;
        self.report(started)
    }
}

pub fn only_experiment(report: &ExperimentReport, name: &str) -> ExperimentReport {
    ExperimentReport::from_rows(report.rows().filter(|r| r.experiment == name).cloned())
}

fn tonal_pair<'a>(ids: &[&'a str], models: &BTreeMap<String, ModelSpec>) -> Option<(&'a str, &'a str)> {
    let pick = |t: Tonality| {
        ids.iter()
            .copied()
            .find(|id| models.get(*id).is_some_and(|m| m.tonality == t))
    };
    Some((pick(Tonality::Tonal)?, pick(Tonality::NonTonal)?))
}

/// The ordinal comparisons each experiment supports, named
/// `<experiment>/<check>`. Experiments without both a tonal and a
/// non-tonal model only get the baseline ordering check.
pub fn ordinal_checks(
    report: &ExperimentReport,
    deltas: &[FinetuneDelta],
    experiments: &[ExperimentSpec],
    models: &BTreeMap<String, ModelSpec>,
) -> Vec<(String, Verdict)> {
    let mut out = Vec::new();
    for e in experiments {
        let name = e.name();
        let own = only_experiment(report, name);
        let ids = e.model_ids();
        match e {
            ExperimentSpec::LayerSweep { .. } => {
                out.push((format!("{name}/baseline_ordering"), check_baseline_ordering(&own, &ids, Task::Tone)));
                if let Some((t, n)) = tonal_pair(&ids, models) {
                    out.push((format!("{name}/final_layer_drop"), check_final_drop(&own, t, n, Task::Tone)));
                }
            }
            ExperimentSpec::FinetuneContrast { pairs, .. } => {
                let pres: Vec<&str> = pairs.iter().map(|p| p[0].as_str()).collect();
                if let Some((t, n)) = tonal_pair(&pres, models) {
                    let of = |pre: &str| -> Vec<FinetuneDelta> {
                        deltas
                            .iter()
                            .filter(|d| d.experiment == name && d.pretrained_model == pre && d.task == "tone")
                            .cloned()
                            .collect()
                    };
                    out.push((format!("{name}/finetune_signs"), check_finetune_signs(&of(t), &of(n))));
                }
            }
            ExperimentSpec::Contrasts { .. } => {
                if let Some((t, n)) = tonal_pair(&ids, models) {
                    out.push((format!("{name}/pair_ranking"), check_pair_ranking(&own, t, n)));
                    out.push((format!("{name}/group_gaps"), check_group_gaps(&own, t, n)));
                }
            }
            ExperimentSpec::Trajectory { .. } => {}
        }
    }
    out
}
