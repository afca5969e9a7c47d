//! A ready-to-run configuration over the bundled mini corpus and stub
//! encoders, exercising all four experiment kinds.

use std::path::{Path, PathBuf};

use toneprobe::fixture::{write_mini_corpus, FixtureSpec};

pub const CONFIG_FILE: &str = "toneprobe.toml";

const MODELS: &str = r#"
[[models]]
model_id = "zh"
language = "mandarin"
tonality = "tonal"
training_stage = "pretrained"
locator = { kind = "stub", seed = 1, final_step = 20000 }
checkpoints = [0, 20000]

[[models]]
model_id = "en"
language = "english"
tonality = "non_tonal"
training_stage = "pretrained"
locator = { kind = "stub", seed = 2, final_step = 20000 }
checkpoints = [0, 20000]

[[models]]
model_id = "zh-ft"
language = "mandarin"
tonality = "tonal"
training_stage = "finetuned"
locator = { kind = "stub", seed = 3, final_step = 20000 }
checkpoints = [20000]

[[models]]
model_id = "en-ft"
language = "english"
tonality = "non_tonal"
training_stage = "finetuned"
locator = { kind = "stub", seed = 4, final_step = 20000 }
checkpoints = [20000]
"#;

/// Experiments of the full fixture run.
pub const EXPERIMENTS: &str = r#"
[[experiments]]
kind = "layer_sweep"
name = "layers"
corpus = "mini"
models = ["zh", "en"]

[[experiments]]
kind = "finetune_contrast"
name = "finetune"
corpus = "mini"
pairs = [["zh", "zh-ft"], ["en", "en-ft"]]

[[experiments]]
kind = "trajectory"
name = "trajectory"
corpus = "mini"
model = "zh"
tasks = ["tone", "consonant"]

[[experiments]]
kind = "contrasts"
name = "contrasts"
corpus = "mini"
models = ["zh", "en"]
"#;

/// Writes the mini corpus under `dir/corpus` and a config next to it.
/// Returns the config path.
pub fn write_fixture(dir: &Path, seed: u64) -> toneprobe::Result<PathBuf> {
    write_fixture_with(dir, seed, EXPERIMENTS)
}

/// Like [`write_fixture`] with a custom `[[experiments]]` section over the
/// fixture models `zh`, `en`, `zh-ft` and `en-ft`.
pub fn write_fixture_with(dir: &Path, seed: u64, experiments: &str) -> toneprobe::Result<PathBuf> {
    let layout = write_mini_corpus(&dir.join("corpus"), &FixtureSpec::default())?;
    let rel = |p: &Path| p.strip_prefix(dir).unwrap_or(p).display().to_string();
    let transcripts = match &layout.transcripts {
        toneprobe::corpus::TranscriptSource::Tsv { path } => {
            format!("{{ kind = \"tsv\", path = {:?} }}", rel(path))
        }
        toneprobe::corpus::TranscriptSource::Thchs30 => "{ kind = \"thchs30\" }".to_string(),
    };
    let tier = layout
        .tier
        .as_ref()
        .map(|t| format!("tier = {t:?}\n"))
        .unwrap_or_default();
    let text = format!(
        "seed = {seed}\ncache_dir = \"cache\"\noutput_dir = \"out\"\n\n\
         [text_encoder]\nkind = \"stub\"\nseed = 1\n\n\
         [[corpora]]\nid = {id:?}\nlanguage = {lang:?}\naudio_root = {audio:?}\nalignments = {align:?}\n\
         transcripts = {transcripts}\n{tier}{MODELS}{experiments}",
        id = layout.id,
        lang = layout.language.as_str(),
        audio = rel(&layout.audio_root),
        align = rel(&layout.alignments),
    );
    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, text).map_err(|source| toneprobe::Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
