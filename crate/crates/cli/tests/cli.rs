use std::path::Path;
use std::process::{Command, Output};

use toneprobe::experiments::{parse_report_csv, RunMetadata};
use toneprobe_cli::fixture::{write_fixture, write_fixture_with};

const SWEEP: &str = r#"
[[experiments]]
kind = "layer_sweep"
name = "sweep"
corpus = "mini"
models = ["zh"]
"#;

fn toneprobe(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toneprobe"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("spawn toneprobe")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_config_exits_1_and_names_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), 1).unwrap();
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("audio_root = \"corpus/wav\"", "audio_root = \"corpus/missing\"")
        .replace("seed = 1\n", "");
    std::fs::write(&cfg, text).unwrap();
    let out = toneprobe(&cfg, &["run"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("corpus/missing"), "{err}");
    assert!(err.contains("`seed` is required"), "{err}");
}

#[test]
fn dry_run_reports_plan_without_reading_audio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), 1).unwrap();
    for wav in std::fs::read_dir(dir.path().join("corpus/wav")).unwrap() {
        std::fs::write(wav.unwrap().path(), b"not a wav").unwrap();
    }
    let out = toneprobe(&cfg, &["run", "--dry-run"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("total: 400 cells, 10 extraction passes"), "{stdout}");
    assert!(!dir.path().join("out").exists());
    assert!(!dir.path().join("cache").exists());
}

#[test]
fn staged_run_equals_all_in_one_and_resumes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = write_fixture_with(a.path(), 5, SWEEP).unwrap();
    let cfg_b = write_fixture_with(b.path(), 5, SWEEP).unwrap();

    for stage in ["ingest", "extract", "probe", "report"] {
        let out = toneprobe(&cfg_a, &[stage, "--workers", "2"]);
        assert_eq!(out.status.code(), Some(0), "{stage}: {}", stderr(&out));
    }
    let out = toneprobe(&cfg_b, &["run"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let csv_a = std::fs::read(a.path().join("out/report.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("out/report.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let rows = parse_report_csv(csv_a.as_slice()).unwrap();
    assert_eq!(rows.len(), 13 + 3);
    assert!(rows.iter().all(|r| !r.is_absent()));

    let again = toneprobe(&cfg_a, &["run"]);
    assert_eq!(again.status.code(), Some(0));
    assert!(stderr(&again).contains("probes trained 0"), "{}", stderr(&again));
    assert!(stderr(&again).contains("0 extracted, 20 cached"), "{}", stderr(&again));
    assert_eq!(std::fs::read(a.path().join("out/report.csv")).unwrap(), csv_a);
}

#[test]
fn uncached_checkpoint_leaves_partial_results_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let experiments = r#"
[[models]]
model_id = "external"
language = "mandarin"
tonality = "tonal"
training_stage = "pretrained"
locator = { kind = "cached" }

[[experiments]]
kind = "layer_sweep"
name = "sweep"
corpus = "mini"
models = ["external"]
"#;
    let cfg = write_fixture_with(dir.path(), 1, experiments).unwrap();
    let out = toneprobe(&cfg, &["run"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let rows = parse_report_csv(std::fs::File::open(dir.path().join("out/report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows.iter().filter(|r| r.is_absent()).count(), 13);
    assert!(rows.iter().filter(|r| r.layer_index < 0).all(|r| !r.is_absent()));
    let meta: RunMetadata =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/run_metadata.json")).unwrap()).unwrap();
    assert_eq!(meta.absent_cells.len(), 13);
    assert_eq!(meta.planned_cells, 16);
}

#[test]
fn report_without_probe_results_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture_with(dir.path(), 1, SWEEP).unwrap();
    let out = toneprobe(&cfg, &["report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("probe stage"), "{}", stderr(&out));
}

#[test]
fn fixture_needs_out_dir() {
    let out = Command::new(env!("CARGO_BIN_EXE_toneprobe"))
        .arg("fixture")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
