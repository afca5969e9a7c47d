//! Acceptance suite. Prints one line per criterion:
//!
//! ```text
//! [PASS] 1 property suite: ...
//! [NOT RUN] 3 split sizes: requires TONEPROBE_THCHS30_CONFIG
//! ```
//!
//! Criteria 3 to 5 need THCHS-30 and pretrained checkpoints. They run only
//! when the environment points at a config for them:
//!
//! - `TONEPROBE_THCHS30_CONFIG`: config declaring the THCHS-30 corpus.
//! - `TONEPROBE_REAL_CONFIG`: config with a layer sweep, a fine-tuning
//!   contrast and a contrasts experiment over a tonal and a non-tonal model.
//! - `TONEPROBE_REQUIRE_REAL=1` turns NOT RUN into a failure.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use toneprobe::corpus::{AlignedSyllable, Language, ToneLabel};
use toneprobe::experiments::analysis::{best_layer, layer_curve};
use toneprobe::experiments::{
    parse_report_csv, write_report_csv, ExperimentReport, ReportRow, RunMetadata,
};
use toneprobe::features::pitch::{F0Track, PitchParams};
use toneprobe::features::text::text_embeddings;
use toneprobe::features::{
    extract_f0_window, extract_mfcc_window, pool_syllable, CheckpointStep, FrameGeometry,
    LayerActivations, StubTextEncoder,
};
use toneprobe::matrix::FeatureMatrix;
use toneprobe::probe::{
    fit_ridge, make_exclusive_split, train_ridge_probe, ExclusionKey, ProbeConfig, ProbeDataset,
    Side, SplitSpec, Task, TaskRows,
};
use toneprobe_cli::fixture::write_fixture;
use toneprobe_cli::stages::ordinal_checks;
use toneprobe_cli::{Overrides, RunConfig};

const RANDOMIZED_SPLITS: usize = 1000;
const POOLING_TOL: f64 = 1e-6;
const RIDGE_REL_TOL: f64 = 1e-6;
const CHANCE_N: usize = 2000;
const CHANCE_LEVEL: f64 = 0.25;
const CHANCE_TOL: f64 = 0.03;
const CHANCE_REPLICATES: u64 = 10;
const F0_TOL_HZ: f64 = 1.0;
const MFCC_DIM: usize = 840;
const F0_DIM: usize = 21;
const TEXT_DIM: usize = 768;
const FIXTURE_BUDGET: Duration = Duration::from_secs(5 * 60);
const SPLIT_SIZE_TOL: f64 = 0.03;
/// Train + test totals of the published tone and consonant splits.
const TONE_TOTAL: usize = 223_851 + 45_772;
const CONSONANT_TOTAL: usize = 92_413 + 15_688;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: property suite

fn syllable(start_s: f64, end_s: f64) -> AlignedSyllable {
    AlignedSyllable {
        utterance_id: "u".into(),
        start_s,
        end_s,
        surface: "妈".into(),
        phoneme_string: "ma".into(),
        tone: ToneLabel::new(Language::Mandarin, 1).unwrap(),
        onset: "m".into(),
        rime: "a".into(),
    }
}

fn split_exclusivity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let classes: Vec<String> = (1..=4).map(|t| format!("T{t}")).collect();
    let (mut done, mut rejected) = (0, 0);
    while done < RANDOMIZED_SPLITS {
        if rejected > 10 * RANDOMIZED_SPLITS {
            return Err(format!("only {done} splits drawn, {rejected} rejected"));
        }
        let n = rng.random_range(40..400);
        let n_groups = rng.random_range(8..80);
        let groups: Vec<String> = (0..n).map(|_| format!("g{}", rng.random_range(0..n_groups))).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let f = rng.random_range(0.1..0.4);
        let spec = SplitSpec::new(ExclusionKey::PhonemeString, f, rng.random()).unwrap();
        let Ok(split) = make_exclusive_split(&groups, &labels, &classes, spec) else {
            rejected += 1;
            continue;
        };
        let sides = split.sides_for(&groups).map_err(|e| e.to_string())?;
        let side_of = |s: Side| -> BTreeSet<&str> {
            groups
                .iter()
                .zip(&sides)
                .filter(|(_, x)| **x == s)
                .map(|(g, _)| g.as_str())
                .collect()
        };
        let overlap = side_of(Side::Train).intersection(&side_of(Side::Test)).count();
        if overlap != 0 {
            return Err(format!("split {done}: {overlap} shared groups"));
        }
        done += 1;
    }
    Ok(format!("{done} splits, 0 shared groups"))
}

fn pooling_vs_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let geometry = FrameGeometry::BASE;
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n_frames = rng.random_range(1..80);
        let dim = rng.random_range(1..24);
        let layers: Vec<Vec<f32>> = (0..3)
            .map(|_| (0..n_frames * dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let acts = LayerActivations {
            model_id: "m".into(),
            checkpoint_step: CheckpointStep::Final,
            utterance_id: "u".into(),
            layer_indices: vec![0, 1, 2],
            n_frames,
            dim,
            layers: layers.clone(),
            geometry,
        };
        let span = n_frames as f64 * geometry.stride_s;
        let a = rng.random_range(0.0..span);
        let b = rng.random_range(0.0..span);
        let (start, end) = (a.min(b), a.max(b) + 1e-4);
        let pooled = pool_syllable(&acts, &syllable(start, end));

        // Frame t covers [t*stride, (t+1)*stride); keep those overlapping the
        // syllable, falling back to the frame holding its start.
        let mut frames: Vec<usize> = (0..n_frames)
            .filter(|&t| {
                let (t0, t1) = (t as f64 * geometry.stride_s, (t + 1) as f64 * geometry.stride_s);
                t0 < end && t1 > start
            })
            .collect();
        if frames.is_empty() {
            frames.push(((start / geometry.stride_s) as usize).min(n_frames - 1));
        }
        for (l, layer) in layers.iter().enumerate() {
            for j in 0..dim {
                let mean = frames.iter().map(|&t| layer[t * dim + j] as f64).sum::<f64>() / frames.len() as f64;
                let err = (pooled[l][j] as f64 - mean).abs();
                worst = worst.max(err);
                if err > POOLING_TOL {
                    return Err(format!("case {case} layer {l} dim {j}: |{} - {mean}| = {err:e}", pooled[l][j]));
                }
            }
        }
    }
    Ok(format!("200 cases, max error {worst:.1e}"))
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn ridge_vs_closed_form() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let shapes = [(120, 10), (60, 25), (30, 50)];
    for &(n, d) in &shapes {
        for center in [false, true] {
            for &alpha in &[1e-2, 1.0, 10.0] {
                let k = 3;
                let data: Vec<f32> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let x = FeatureMatrix::from_vec(n, d, data).unwrap();
                let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
                let rows: Vec<usize> = (0..n).collect();
                let fit = fit_ridge(&x, &rows, &labels, k, &[alpha], center).map_err(|e| e.to_string())?;
                let fit = &fit[0];

                let mu: Vec<f64> = (0..d)
                    .map(|j| if center { (0..n).map(|i| x.row(i)[j] as f64).sum::<f64>() / n as f64 } else { 0.0 })
                    .collect();
                let xc: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|j| x.row(i)[j] as f64 - mu[j]).collect()).collect();
                let gram: Vec<Vec<f64>> = (0..d)
                    .map(|a| {
                        (0..d)
                            .map(|b| xc.iter().map(|r| r[a] * r[b]).sum::<f64>() + if a == b { alpha } else { 0.0 })
                            .collect()
                    })
                    .collect();
                for c in 0..k {
                    let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                    let ybar = if center { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
                    let rhs: Vec<f64> = (0..d).map(|j| xc.iter().zip(&y).map(|(r, yi)| r[j] * (yi - ybar)).sum()).collect();
                    let w = solve(gram.clone(), rhs);
                    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
                    let err = w
                        .iter()
                        .zip(fit.class_weights(c))
                        .fold(0.0f64, |m, (o, g)| m.max((o - g).abs()))
                        / scale;
                    let b = ybar - w.iter().zip(&mu).map(|(wi, m)| wi * m).sum::<f64>();
                    let err = err.max((b - fit.intercept[c]).abs() / scale.max(b.abs()));
                    worst = worst.max(err);
                    if err > RIDGE_REL_TOL {
                        return Err(format!("n={n} d={d} center={center} alpha={alpha} class {c}: rel err {err:e}"));
                    }
                }
            }
        }
    }
    Ok(format!("primal and dual, centered and not, max rel error {worst:.1e}"))
}

fn chance_level() -> Result<String, String> {
    let classes: Vec<String> = (1..=4).map(|t| format!("T{t}")).collect();
    let mut accs = Vec::new();
    for rep in 0..CHANCE_REPLICATES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
        let d = 16;
        let mut labels: Vec<usize> = (0..CHANCE_N).map(|i| i % 4).collect();
        let data: Vec<f32> = labels
            .iter()
            .flat_map(|&l| (0..d).map(move |j| if j % 4 == l { 1.0f32 } else { 0.0 }))
            .map(|v| v + Distribution::<f32>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f32>>();
        labels.shuffle(&mut rng);
        let x = FeatureMatrix::from_vec(CHANCE_N, d, data).unwrap();
        let rows = TaskRows {
            task: Task::Tone,
            class_names: classes.clone(),
            items: (0..CHANCE_N).collect(),
            labels,
            group_keys: (0..CHANCE_N).map(|i| format!("g{}", i / 4)).collect(),
        };
        let spec = SplitSpec::new(ExclusionKey::PhonemeString, 0.2, rep).unwrap();
        let split = make_exclusive_split(&rows.group_keys, &rows.labels, &rows.class_names, spec).map_err(|e| e.to_string())?;
        let ds = ProbeDataset::new(&x, &rows, &split).map_err(|e| e.to_string())?;
        let cfg = ProbeConfig { seed: rep, ..ProbeConfig::default() };
        accs.push(train_ridge_probe(&ds, &cfg).map_err(|e| e.to_string())?.accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let (lo, hi) = accs.iter().fold((1.0f64, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
    let detail = format!("mean of {CHANCE_REPLICATES} = {mean:.4} (range {lo:.4}..{hi:.4})");
    if (mean - CHANCE_LEVEL).abs() <= CHANCE_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sine(freq: f64, secs: f64) -> Vec<f32> {
    (0..(secs * 16_000.0) as usize)
        .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin()) as f32)
        .collect()
}

fn f0_of_sine() -> Result<String, String> {
    let track = F0Track::compute(&sine(200.0, 1.0), PitchParams::default());
    let voiced: Vec<f64> = track.values.iter().filter(|v| **v > 0.0).map(|v| *v as f64).collect();
    if voiced.len() < track.values.len() / 2 {
        return Err(format!("only {} of {} frames voiced", voiced.len(), track.values.len()));
    }
    let worst = voiced.iter().fold(0.0f64, |m, v| m.max((v - 200.0).abs()));
    let detail = format!("{} voiced frames, max |f0 - 200| = {worst:.3} Hz", voiced.len());
    if worst <= F0_TOL_HZ {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn vector_dims() -> Result<String, String> {
    let audio = sine(180.0, 1.0);
    let syl = syllable(0.4, 0.6);
    let mfcc = extract_mfcc_window(&audio, &syl).as_slice().len();
    let f0 = extract_f0_window(&audio, &syl).as_slice().len();
    let chars: Vec<String> = ["我", "们", "好"].iter().map(|s| s.to_string()).collect();
    let text = text_embeddings(&StubTextEncoder::new(0), &chars).map_err(|e| e.to_string())?;
    let text_dim = text[0].as_slice().len();
    let detail = format!("mfcc {mfcc}, f0 {f0}, text {text_dim}");
    if (mfcc, f0, text_dim) == (MFCC_DIM, F0_DIM, TEXT_DIM) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_row(rng: &mut ChaCha8Rng, i: usize) -> ReportRow {
    let present = rng.random_bool(0.8);
    let train_n = rng.random_range(1..100_000usize);
    let test_n = rng.random_range(1..30_000usize);
    ReportRow {
        experiment: format!("exp,{}", i % 3),
        corpus: "c\"q\"".into(),
        model_id: format!("m{}", i % 4),
        language: "mandarin".into(),
        tonality: "tonal".into(),
        training_stage: "pretrained".into(),
        checkpoint_step: rng.random_range(0..100_000u64).to_string(),
        layer_index: rng.random_range(-3..13),
        task: "tone_pair".into(),
        subtask: format!("T{}-T{}", i % 4 + 1, 4),
        selected_alpha: present.then(|| 10f64.powi(rng.random_range(-4..3))),
        train_n: present.then_some(train_n),
        test_n: present.then_some(test_n),
        accuracy: present.then(|| rng.random::<f64>()),
        realized_test_fraction: present.then(|| test_n as f64 / (train_n + test_n) as f64),
        seed: rng.random(),
        config_hash: format!("{:016x}", rng.random::<u64>()),
    }
}

fn csv_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let n = rng.random_range(1..40);
        let report = ExperimentReport::from_rows((0..n).map(|i| random_row(&mut rng, i)));
        let mut bytes = Vec::new();
        write_report_csv(&report, &mut bytes).map_err(|e| e.to_string())?;
        let parsed = parse_report_csv(bytes.as_slice()).map_err(|e| e.to_string())?;
        let original: Vec<ReportRow> = report.rows().cloned().collect();
        if parsed != original {
            return Err(format!("case {case}: rows differ after parsing"));
        }
        let mut again = Vec::new();
        write_report_csv(&ExperimentReport::from_rows(parsed), &mut again).map_err(|e| e.to_string())?;
        if again != bytes {
            return Err(format!("case {case}: bytes differ after rewriting"));
        }
    }
    Ok("200 reports, rows and bytes identical".into())
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    type Check = fn() -> Result<String, String>;
    let checks: [(&str, Check); 7] = [
        ("split exclusivity", split_exclusivity),
        ("pooling", pooling_vs_brute_force),
        ("ridge", ridge_vs_closed_form),
        ("chance", chance_level),
        ("f0 200 Hz", f0_of_sine),
        ("dims", vector_dims),
        ("csv", csv_round_trip),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, check) in checks {
        match check() {
            Ok(d) => parts.push(format!("{name}: {d}")),
            Err(d) => {
                pass = false;
                parts.push(format!("{name} FAILED: {d}"));
            }
        }
    }
    parts.push(format!("{:.1}s", t0.elapsed().as_secs_f64()));
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// Criteria 2 and 6: the bundled fixture end to end

struct FixtureRun {
    status: Option<i32>,
    elapsed: Duration,
    csv: Vec<u8>,
    metadata: Option<RunMetadata>,
    stderr: String,
}

fn toneprobe(args: &[&str], config: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_toneprobe"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("spawn toneprobe")
}

fn run_fixture(dir: &Path) -> FixtureRun {
    let config = write_fixture(dir, 2024).expect("write fixture");
    let t0 = Instant::now();
    let out = toneprobe(&["run"], &config);
    let elapsed = t0.elapsed();
    FixtureRun {
        status: out.status.code(),
        elapsed,
        csv: std::fs::read(dir.join("out/report.csv")).unwrap_or_default(),
        metadata: std::fs::read(dir.join("out/run_metadata.json"))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok()),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn criterion_2(a: &FixtureRun, b: &FixtureRun) -> Outcome {
    let mut problems = Vec::new();
    for (name, r) in [("first", a), ("second", b)] {
        if r.status != Some(0) {
            let tail: String = r.stderr.lines().rev().take(3).collect::<Vec<_>>().join(" | ");
            problems.push(format!("{name} run exited {:?}: {tail}", r.status));
        }
        if r.elapsed > FIXTURE_BUDGET {
            problems.push(format!("{name} run took {:.0}s", r.elapsed.as_secs_f64()));
        }
    }
    let rows = parse_report_csv(a.csv.as_slice()).unwrap_or_default();
    let absent = rows.iter().filter(|r| r.is_absent()).count();
    let planned = a.metadata.as_ref().map(|m| m.planned_cells).unwrap_or(0);
    if rows.is_empty() || rows.len() != planned || absent > 0 {
        problems.push(format!("{} rows, {planned} planned, {absent} absent", rows.len()));
    }
    let identical = !a.csv.is_empty() && a.csv == b.csv;
    if !identical {
        problems.push("report.csv differs between runs".into());
    }
    let detail = format!(
        "{} rows all populated; runs {:.0}s and {:.0}s (budget {}s); byte-identical CSV {}",
        rows.len(),
        a.elapsed.as_secs_f64(),
        b.elapsed.as_secs_f64(),
        FIXTURE_BUDGET.as_secs(),
        identical
    );
    if problems.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", problems.join("; ")))
    }
}

fn criterion_6(run: &FixtureRun) -> Outcome {
    let Ok(rows) = parse_report_csv(run.csv.as_slice()) else {
        return Outcome::Fail("no fixture report".into());
    };
    let report = ExperimentReport::from_rows(rows.into_iter().filter(|r| r.experiment == "trajectory"));
    let mut parts = Vec::new();
    let mut pass = true;
    for task in [Task::Tone, Task::Consonant] {
        let at = |s| best_layer(&layer_curve(&report, "zh", Some(CheckpointStep::Step(s)), task));
        match (at(0), at(20_000)) {
            (Some((l0, a0)), Some((l1, a1))) => {
                pass &= a0 < a1;
                parts.push(format!("{task}: step 0 {a0:.3} (layer {l0}) vs trained {a1:.3} (layer {l1})"));
            }
            _ => {
                pass = false;
                parts.push(format!("{task}: trajectory rows missing"));
            }
        }
    }
    parts.push("85k-step pre-training itself is out of scope; external checkpoint series are probed via `cached` or `command` locators".into());
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// Criteria 3 to 5: real data

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn criterion_3() -> Outcome {
    let Some(config) = env_path("TONEPROBE_THCHS30_CONFIG") else {
        return Outcome::NotRun("requires THCHS-30; set TONEPROBE_THCHS30_CONFIG".into());
    };
    let cfg = match RunConfig::load(&config, &Overrides::default()) {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let out = toneprobe(&["ingest"], &config);
    if out.status.code() != Some(0) {
        return Outcome::Fail(format!("ingest failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let Some(corpus) = cfg.used_corpora().into_iter().find(|c| c.language == Language::Mandarin) else {
        return Outcome::Fail("config has no Mandarin corpus in use".into());
    };
    let path = toneprobe_cli::Layout::new(&cfg.output_dir).ingest_report(&corpus.id);
    let summary: toneprobe_cli::stages::CorpusIngest = match std::fs::read(&path)
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("{}: {e}", path.display())),
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for (task, expected) in [("tone", TONE_TOTAL), ("consonant", CONSONANT_TOTAL)] {
        match summary.splits.iter().find(|s| s.task == task) {
            Some(s) => {
                let total = s.train_n + s.test_n;
                let rel = (total as f64 - expected as f64) / expected as f64;
                pass &= rel.abs() <= SPLIT_SIZE_TOL;
                parts.push(format!(
                    "{task} {}/{} = {total} vs {expected} ({:+.2}%)",
                    s.train_n,
                    s.test_n,
                    100.0 * rel
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{task}: no split"));
            }
        }
    }
    let r = &summary.ingest;
    parts.push(format!(
        "reconciliation: {} transcript syllables = {} emitted + {} in {} skipped utterances; {} neutral removed",
        r.transcript_syllables,
        r.emitted_syllables,
        r.skipped_syllables(),
        r.skips.len(),
        r.neutral_tone_syllables
    ));
    if summary.subsample_fraction < 1.0 {
        pass = false;
        parts.push(format!("subsample {} < 1", summary.subsample_fraction));
    }
    verdict(pass, parts.join("; "))
}

/// Runs the real-data config once and returns its ordinal checks.
fn real_checks() -> Option<Result<Vec<(String, toneprobe::experiments::analysis::Verdict)>, String>> {
    let config = env_path("TONEPROBE_REAL_CONFIG")?;
    Some((|| {
        let cfg = RunConfig::load(&config, &Overrides::default()).map_err(|e| e.to_string())?;
        let out = toneprobe(&["run"], &config);
        if out.status.code() != Some(0) {
            return Err(format!("run exited {:?}", out.status.code()));
        }
        let csv = std::fs::read(cfg.output_dir.join("report.csv")).map_err(|e| e.to_string())?;
        let report = ExperimentReport::from_rows(parse_report_csv(csv.as_slice()).map_err(|e| e.to_string())?);
        let deltas_path = cfg.output_dir.join("finetune_deltas.csv");
        let deltas: Vec<toneprobe::experiments::FinetuneDelta> = csv::Reader::from_path(&deltas_path)
            .map_err(|e| e.to_string())?
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        Ok(ordinal_checks(&report, &deltas, &cfg.experiments, &cfg.model_map()))
    })())
}

fn from_checks(
    checks: &Option<Result<Vec<(String, toneprobe::experiments::analysis::Verdict)>, String>>,
    wanted: &[(&str, &str)],
) -> Outcome {
    let Some(checks) = checks else {
        return Outcome::NotRun("requires THCHS-30 and pretrained checkpoints; set TONEPROBE_REAL_CONFIG".into());
    };
    let checks = match checks {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(e.clone()),
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, suffix) in wanted {
        match checks.iter().find(|(n, _)| n.ends_with(&format!("/{suffix}"))) {
            Some((n, v)) => {
                pass &= v.pass;
                parts.push(format!("{label} {} ({n}: {})", if v.pass { "ok" } else { "violated" }, v.detail));
            }
            None => {
                pass = false;
                parts.push(format!("{label}: no experiment provides `{suffix}`"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let require_real = std::env::var("TONEPROBE_REQUIRE_REAL").is_ok_and(|v| v == "1");
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("1 property suite", criterion_1()));

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_fixture(a.path());
    let second = run_fixture(b.path());
    results.push(("2 mini-corpus end to end", criterion_2(&first, &second)));

    results.push(("3 split sizes", criterion_3()));
    let checks = real_checks();
    results.push((
        "4 figure orderings",
        from_checks(
            &checks,
            &[("(a) layers > mfcc > text", "baseline_ordering"), ("(b) final-layer drop", "final_layer_drop"), ("(c) fine-tuning signs", "finetune_signs")],
        ),
    ));
    results.push((
        "5 contrasts",
        from_checks(&checks, &[("tone pair ranking", "pair_ranking"), ("consonant group gaps", "group_gaps")]),
    ));
    results.push(("6 trajectory", criterion_6(&first)));

    println!();
    let mut failed = Vec::new();
    for (name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("[{tag}] {name}: {detail}");
        if matches!(outcome, Outcome::Fail(_)) || (require_real && matches!(outcome, Outcome::NotRun(_))) {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
