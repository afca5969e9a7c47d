//! Run configuration: parsing, validation and the config hash.
//!
//! Validation keeps going after the first problem so a broken config is
//! reported in one pass.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toneprobe::corpus::{CorpusLayout, Language, TranscriptSource};
use toneprobe::experiments::{ExperimentSpec, ModelSpec, TextEncoderSpec};
use toneprobe::probe::{Task, DEFAULT_ALPHA_GRID, DEFAULT_FOLDS, DEFAULT_TEST_FRACTION};

const TOP_LEVEL_KEYS: [&str; 13] = [
    "seed",
    "cache_dir",
    "output_dir",
    "subsample_fraction",
    "alpha_grid",
    "test_fraction",
    "folds",
    "center",
    "text_encoder",
    "corpora",
    "models",
    "experiments",
    "probe_workers",
];

/// A fully resolved configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub subsample_fraction: f64,
    pub alpha_grid: Vec<f64>,
    pub test_fraction: f64,
    pub folds: usize,
    pub center: bool,
    pub text_encoder: TextEncoderSpec,
    /// Probe worker count; 0 means one per available processor.
    pub probe_workers: usize,
    pub corpora: Vec<CorpusLayout>,
    pub models: Vec<ModelSpec>,
    pub experiments: Vec<ExperimentSpec>,
    /// Corpora with paths as written, so the hash does not depend on where
    /// the config file lives.
    #[serde(skip)]
    declared_corpora: Vec<CorpusLayout>,
}

/// Everything wrong with a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Values the command line may override before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub subsample_fraction: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub probe_workers: Option<usize>,
}

/// The subset of the config that determines cell values. Output and cache
/// locations, worker counts and the experiment list are left out, so moving
/// a run or adding an experiment keeps completed cells valid.
#[derive(Serialize)]
struct HashedConfig<'a> {
    seed: u64,
    subsample_fraction: f64,
    alpha_grid: &'a [f64],
    test_fraction: f64,
    folds: usize,
    center: bool,
    text_encoder: &'a TextEncoderSpec,
    corpora: &'a [CorpusLayout],
    models: &'a [ModelSpec],
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, ConfigErrors> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![e.to_string()]))?;
        let mut errors = Vec::new();

        for key in table.keys() {
            if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
                errors.push(format!("unknown key `{key}`"));
            }
        }

        let seed = match (overrides.seed, table.get("seed")) {
            (Some(s), _) => Some(s),
            (None, Some(v)) => field::<u64>(v, "seed", &mut errors),
            (None, None) => {
                errors.push("`seed` is required".into());
                None
            }
        };
        let path_field = |key: &str, errors: &mut Vec<String>| match table.get(key) {
            Some(v) => field::<PathBuf>(v, key, errors).map(|p| base.join(p)),
            None => {
                errors.push(format!("`{key}` is required"));
                None
            }
        };
        let cache_dir = path_field("cache_dir", &mut errors);
        let output_dir = match &overrides.output_dir {
            Some(p) => Some(p.clone()),
            None => path_field("output_dir", &mut errors),
        };
        let subsample_fraction = overrides
            .subsample_fraction
            .or_else(|| optional(&table, "subsample_fraction", &mut errors))
            .unwrap_or(1.0);
        let alpha_grid: Vec<f64> = optional(&table, "alpha_grid", &mut errors).unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
        let test_fraction = optional(&table, "test_fraction", &mut errors).unwrap_or(DEFAULT_TEST_FRACTION);
        let folds = optional(&table, "folds", &mut errors).unwrap_or(DEFAULT_FOLDS);
        let center = optional(&table, "center", &mut errors).unwrap_or(true);
        let text_encoder = optional(&table, "text_encoder", &mut errors).unwrap_or(TextEncoderSpec::Stub { seed: 0 });
        let probe_workers = overrides
            .probe_workers
            .or_else(|| optional(&table, "probe_workers", &mut errors))
            .unwrap_or(0);

        let mut corpora: Vec<CorpusLayout> = entries(&table, "corpora", &mut errors);
        let models: Vec<ModelSpec> = entries(&table, "models", &mut errors);
        let experiments: Vec<ExperimentSpec> = entries(&table, "experiments", &mut errors);

        if !(subsample_fraction > 0.0 && subsample_fraction <= 1.0) {
            errors.push(format!("subsample_fraction {subsample_fraction} is outside (0, 1]"));
        }
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            errors.push(format!("test_fraction {test_fraction} is outside (0, 1)"));
        }
        if alpha_grid.is_empty() {
            errors.push("alpha_grid is empty".into());
        }
        for a in alpha_grid.iter().filter(|a| !(a.is_finite() && **a > 0.0)) {
            errors.push(format!("alpha_grid entry {a} is not a positive number"));
        }
        if folds < 2 {
            errors.push(format!("folds must be at least 2, got {folds}"));
        }

        let declared_corpora = corpora.clone();
        for c in &mut corpora {
            resolve_corpus(c, base);
        }
        check_corpora(&corpora, &mut errors);
        check_models(&models, &mut errors);
        check_experiments(&experiments, &corpora, &models, &mut errors);

        match (seed, cache_dir, output_dir) {
            (Some(seed), Some(cache_dir), Some(output_dir)) if errors.is_empty() => Ok(RunConfig {
                seed,
                cache_dir,
                output_dir,
                subsample_fraction,
                alpha_grid,
                test_fraction,
                folds,
                center,
                text_encoder,
                probe_workers,
                corpora,
                models,
                experiments,
                declared_corpora,
            }),
            _ => Err(ConfigErrors(errors)),
        }
    }

    /// SHA-256 of the canonical JSON of everything that affects results.
    pub fn config_hash(&self) -> String {
        let hashed = HashedConfig {
            seed: self.seed,
            subsample_fraction: self.subsample_fraction,
            alpha_grid: &self.alpha_grid,
            test_fraction: self.test_fraction,
            folds: self.folds,
            center: self.center,
            text_encoder: &self.text_encoder,
            corpora: &self.declared_corpora,
            models: &self.models,
        };
        // serde_json::Value keeps object keys sorted, which makes the
        // serialization canonical regardless of field order.
        let value = serde_json::to_value(&hashed).expect("config serializes");
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn corpus(&self, id: &str) -> Option<&CorpusLayout> {
        self.corpora.iter().find(|c| c.id == id)
    }

    pub fn model_map(&self) -> BTreeMap<String, ModelSpec> {
        self.models.iter().map(|m| (m.model_id.clone(), m.clone())).collect()
    }

    /// Corpora named by at least one experiment, in declaration order.
    pub fn used_corpora(&self) -> Vec<&CorpusLayout> {
        let used: BTreeSet<&str> = self.experiments.iter().map(ExperimentSpec::corpus).collect();
        self.corpora.iter().filter(|c| used.contains(c.id.as_str())).collect()
    }
}

fn optional<T: DeserializeOwned>(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Option<T> {
    table.get(key).and_then(|v| field(v, key, errors))
}

fn field<T: DeserializeOwned>(value: &toml::Value, key: &str, errors: &mut Vec<String>) -> Option<T> {
    match value.clone().try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("`{key}`: {}", e.message().trim()));
            None
        }
    }
}

/// Deserializes each element of an array of tables on its own, so one bad
/// entry does not hide problems in the others.
fn entries<T: DeserializeOwned>(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Vec<T> {
    let Some(value) = table.get(key) else {
        errors.push(format!("`{key}` is required"));
        return Vec::new();
    };
    let Some(items) = value.as_array() else {
        errors.push(format!("`{key}` must be an array of tables"));
        return Vec::new();
    };
    items
        .iter()
        .enumerate()
        .filter_map(|(i, v)| field(v, &format!("{key}[{i}]"), errors))
        .collect()
}

fn resolve_corpus(c: &mut CorpusLayout, base: &Path) {
    c.audio_root = base.join(&c.audio_root);
    c.alignments = base.join(&c.alignments);
    if let TranscriptSource::Tsv { path } = &mut c.transcripts {
        *path = base.join(&*path);
    }
}

fn check_corpora(corpora: &[CorpusLayout], errors: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for c in corpora {
        if !seen.insert(c.id.as_str()) {
            errors.push(format!("corpus `{}` declared twice", c.id));
        }
        let mut paths = vec![("audio_root", &c.audio_root), ("alignments", &c.alignments)];
        if let TranscriptSource::Tsv { path } = &c.transcripts {
            paths.push(("transcripts", path));
        }
        for (what, p) in paths {
            if !p.exists() {
                errors.push(format!("corpus `{}`: {what} {} does not exist", c.id, p.display()));
            }
        }
    }
}

fn check_models(models: &[ModelSpec], errors: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for m in models {
        if !seen.insert(m.model_id.as_str()) {
            errors.push(format!("model `{}` declared twice", m.model_id));
        }
        errors.extend(m.problems());
    }
}

fn check_experiments(
    experiments: &[ExperimentSpec],
    corpora: &[CorpusLayout],
    models: &[ModelSpec],
    errors: &mut Vec<String>,
) {
    let mut seen = BTreeSet::new();
    for e in experiments {
        let name = e.name();
        if name.is_empty() || name.contains(['/', '\\']) {
            errors.push(format!("experiment name `{name}` must be non-empty and contain no path separators"));
        }
        if !seen.insert(name) {
            errors.push(format!("experiment `{name}` declared twice"));
        }
        match corpora.iter().find(|c| c.id == e.corpus()) {
            None => errors.push(format!("experiment `{name}` names unknown corpus `{}`", e.corpus())),
            Some(c) if c.language != Language::Mandarin => {
                if e.tasks().iter().any(|t| matches!(t.base(), Task::Consonant)) {
                    errors.push(format!(
                        "experiment `{name}`: consonant tasks need a Mandarin corpus, `{}` is {}",
                        c.id,
                        c.language.as_str()
                    ));
                }
            }
            Some(_) => {}
        }
        for id in e.model_ids() {
            if !models.iter().any(|m| m.model_id == id) {
                errors.push(format!("experiment `{name}` names unknown model `{id}`"));
            }
        }
        if let ExperimentSpec::Trajectory { model, steps, .. } = e {
            if let Some(m) = models.iter().find(|m| &m.model_id == model) {
                for s in steps.iter().filter(|s| !m.checkpoints.contains(s)) {
                    errors.push(format!("experiment `{name}`: model `{model}` declares no checkpoint {s}"));
                }
            }
        }
    }
    if experiments.is_empty() {
        errors.push("no experiments declared".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_dirs() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("wav")).unwrap();
        std::fs::create_dir_all(dir.path().join("align")).unwrap();
        std::fs::write(dir.path().join("trans.tsv"), "").unwrap();
        dir
    }

    const MINIMAL: &str = r#"
seed = 3
cache_dir = "cache"
output_dir = "out"

[[corpora]]
id = "c"
language = "mandarin"
audio_root = "wav"
alignments = "align"
transcripts = { kind = "tsv", path = "trans.tsv" }

[[models]]
model_id = "zh"
language = "mandarin"
tonality = "tonal"
training_stage = "pretrained"
locator = { kind = "stub", seed = 1, final_step = 100 }

[[experiments]]
kind = "layer_sweep"
name = "sweep"
corpus = "c"
models = ["zh"]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = corpus_dirs();
        let cfg = RunConfig::parse(MINIMAL, dir.path(), &Overrides::default()).unwrap();
        assert_eq!(cfg.alpha_grid, vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]);
        assert_eq!(cfg.test_fraction, 0.2);
        assert_eq!(cfg.subsample_fraction, 1.0);
        assert_eq!(cfg.folds, 5);
        assert!(cfg.center);
        assert_eq!(cfg.cache_dir, dir.path().join("cache"));
        assert_eq!(cfg.corpora[0].audio_root, dir.path().join("wav"));
    }

    #[test]
    fn missing_audio_root_is_named() {
        let dir = corpus_dirs();
        let text = MINIMAL.replace("audio_root = \"wav\"", "audio_root = \"nowhere\"");
        let err = RunConfig::parse(&text, dir.path(), &Overrides::default()).unwrap_err();
        assert_eq!(err.0.len(), 1, "{err}");
        assert!(err.0[0].contains("nowhere"), "{err}");
    }

    #[test]
    fn all_errors_reported_together() {
        let dir = corpus_dirs();
        let text = MINIMAL
            .replace("seed = 3\n", "colour = 1\n")
            .replace("tonality = \"tonal\"", "tonality = \"non_tonal\"")
            .replace("models = [\"zh\"]", "models = [\"zh\", \"en\"]")
            .replace("audio_root = \"wav\"", "audio_root = \"nowhere\"");
        let err = RunConfig::parse(&text, dir.path(), &Overrides::default()).unwrap_err();
        let all = err.to_string();
        for needle in ["colour", "`seed` is required", "tonal", "unknown model `en`", "nowhere"] {
            assert!(all.contains(needle), "missing {needle}: {all}");
        }
    }

    #[test]
    fn unknown_nested_keys_rejected_per_entry() {
        let dir = corpus_dirs();
        let text = MINIMAL
            .replace("alignments = \"align\"", "alignments = \"align\"\ntierr = \"x\"")
            .replace("name = \"sweep\"", "name = \"sweep\"\nlayers = 3");
        let err = RunConfig::parse(&text, dir.path(), &Overrides::default()).unwrap_err();
        let all = err.to_string();
        assert!(all.contains("tierr"), "{all}");
        assert!(all.contains("layers"), "{all}");
    }

    #[test]
    fn seed_override_replaces_missing_seed() {
        let dir = corpus_dirs();
        let text = MINIMAL.replace("seed = 3\n", "");
        let o = Overrides {
            seed: Some(9),
            ..Overrides::default()
        };
        assert_eq!(RunConfig::parse(&text, dir.path(), &o).unwrap().seed, 9);
    }

    #[test]
    fn hash_ignores_locations_and_experiments() {
        let dir = corpus_dirs();
        let a = RunConfig::parse(MINIMAL, dir.path(), &Overrides::default()).unwrap();
        let moved = MINIMAL
            .replace("output_dir = \"out\"", "output_dir = \"elsewhere\"")
            .replace("name = \"sweep\"", "name = \"other\"");
        let b = RunConfig::parse(&moved, dir.path(), &Overrides::default()).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let reseeded = MINIMAL.replace("seed = 3", "seed = 4");
        let c = RunConfig::parse(&reseeded, dir.path(), &Overrides::default()).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn bad_ranges_rejected() {
        let dir = corpus_dirs();
        let text = format!("subsample_fraction = 0.0\ntest_fraction = 1.5\nalpha_grid = [-1.0]\n{MINIMAL}");
        let err = RunConfig::parse(&text, dir.path(), &Overrides::default()).unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
    }

    #[test]
    fn consonant_task_needs_mandarin_corpus() {
        let dir = corpus_dirs();
        let text = MINIMAL
            .replace("language = \"mandarin\"\naudio_root", "language = \"vietnamese\"\naudio_root")
            .replace("models = [\"zh\"]", "models = [\"zh\"]\ntasks = [\"consonant\"]");
        let err = RunConfig::parse(&text, dir.path(), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("consonant"), "{err}");
    }
}
