use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::dataset::ProbeDataset;
use super::ridge::{fit_ridge, predict, GramStats, RidgeFit};
use super::{Side, Task, DEFAULT_ALPHA_GRID, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::features::CheckpointStep;

const FOLD_RETRIES: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub alphas: Vec<f64>,
    pub folds: usize,
    /// Subtract the train-side mean before fitting and keep an intercept.
    pub center: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            alphas: DEFAULT_ALPHA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            center: true,
            seed: 0,
        }
    }
}

/// One (model, checkpoint, layer, task) cell of a report.
/// Baselines use negative pseudo-layer indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub layer_index: i32,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task: Task,
    pub class_names: Vec<String>,
    pub selected_alpha: f64,
    pub train_n: usize,
    pub test_n: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]` on the test side.
    pub confusion: Vec<Vec<usize>>,
    /// Mean fold accuracy per α, in grid order.
    pub cv_accuracy: Vec<f64>,
}

impl ProbeResult {
    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum()
    }
}

fn fold_assignment(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

fn degenerate(fold: &[usize], labels: &[usize], n_classes: usize, k: usize) -> bool {
    (0..k).any(|f| {
        let held = fold.iter().filter(|&&x| x == f).count();
        let mut seen = vec![false; n_classes];
        for (i, &l) in labels.iter().enumerate() {
            if fold[i] != f {
                seen[l] = true;
            }
        }
        held == 0 || seen.iter().any(|s| !s)
    })
}

/// Fold id per item, stratified by label. A fold that is empty or whose
/// complement misses a class is re-drawn with the next seed.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Probe(format!("{k} folds; need at least 2")));
    }
    for attempt in 0..FOLD_RETRIES {
        let fold = fold_assignment(labels, n_classes, k, seed.wrapping_add(attempt));
        if !degenerate(&fold, labels, n_classes, k) {
            return Ok(fold);
        }
    }
    Err(Error::Probe(format!(
        "no usable {k}-fold stratification of {} items after {FOLD_RETRIES} seeds",
        labels.len()
    )))
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Cross-validates α on the train side, refits on all of it, scores the
/// test side.
pub fn train_ridge_probe(ds: &ProbeDataset<'_>, cfg: &ProbeConfig) -> Result<ProbeResult> {
    if cfg.alphas.is_empty() {
        return Err(Error::Probe("empty alpha grid".into()));
    }
    let k = ds.n_classes();
    let x = ds.features;
    let (train_rows, train_labels) = ds.side(Side::Train);
    let (test_rows, test_labels) = ds.side(Side::Test);
    let fold = stratified_folds(&train_labels, k, cfg.folds, cfg.seed)?;

    let primal = train_rows.len() >= x.cols();
    let full = primal.then(|| GramStats::accumulate(x, &train_rows, &train_labels, k));
    let mut sums = vec![0.0; cfg.alphas.len()];
    for f in 0..cfg.folds {
        let pick = |keep: bool| -> (Vec<usize>, Vec<usize>) {
            train_rows
                .iter()
                .zip(&train_labels)
                .zip(&fold)
                .filter(|(_, &g)| (g == f) != keep)
                .map(|((r, l), _)| (*r, *l))
                .unzip()
        };
        let (fit_rows, fit_labels) = pick(true);
        let (held_rows, held_labels) = pick(false);
        let fits: Vec<RidgeFit> = match &full {
            Some(full) => full
                .sub(&GramStats::accumulate(x, &held_rows, &held_labels, k))
                .solve(&cfg.alphas, cfg.center)?,
            None => fit_ridge(x, &fit_rows, &fit_labels, k, &cfg.alphas, cfg.center)?,
        };
        for (s, fit) in sums.iter_mut().zip(&fits) {
            *s += accuracy(&predict(fit, x, &held_rows), &held_labels);
        }
    }
    let cv_accuracy: Vec<f64> = sums.iter().map(|s| s / cfg.folds as f64).collect();

    let mut best = 0;
    for i in 1..cfg.alphas.len() {
        let better = cv_accuracy[i] > cv_accuracy[best];
        let tie_smaller = cv_accuracy[i] == cv_accuracy[best] && cfg.alphas[i] < cfg.alphas[best];
        if better || tie_smaller {
            best = i;
        }
    }
    let alpha = cfg.alphas[best];
    let fit = match &full {
        Some(full) => full.solve(&[alpha], cfg.center)?,
        None => fit_ridge(x, &train_rows, &train_labels, k, &[alpha], cfg.center)?,
    }
    .remove(0);

    let pred = predict(&fit, x, &test_rows);
    let mut confusion = vec![vec![0; k]; k];
    for (&p, &t) in pred.iter().zip(&test_labels) {
        confusion[t][p] += 1;
    }
    let mut result = ProbeResult {
        task: ds.task,
        class_names: ds.class_names.clone(),
        selected_alpha: alpha,
        train_n: train_rows.len(),
        test_n: test_rows.len(),
        accuracy: 0.0,
        confusion,
        cv_accuracy,
    };
    result.accuracy = result.correct() as f64 / result.test_n as f64;
    Ok(result)
}

/// Binary probe on tones `a` and `b` of a four-way tone dataset.
pub fn evaluate_pair_probe(ds: &ProbeDataset<'_>, a: u8, b: u8, cfg: &ProbeConfig) -> Result<ProbeResult> {
    train_ridge_probe(&ds.restrict(Task::TonePair { a, b })?, cfg)
}

/// Within-group onset probe on a consonant dataset.
pub fn evaluate_consonant_group(ds: &ProbeDataset<'_>, group: u8, cfg: &ProbeConfig) -> Result<ProbeResult> {
    train_ridge_probe(&ds.restrict(Task::ConsonantGroup { group })?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::probe::{make_exclusive_split, ExclusionKey, SplitSpec, TaskRows};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rows_for(task: Task, classes: &[&str], labels: Vec<usize>, groups: Vec<String>) -> TaskRows {
        TaskRows {
            task,
            class_names: classes.iter().map(|s| s.to_string()).collect(),
            items: (0..labels.len()).collect(),
            labels,
            group_keys: groups,
        }
    }

    fn blobs(n: usize, d: usize, k: usize, sep: f32, seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let mut data = Vec::with_capacity(n * d);
        for &l in &labels {
            for j in 0..d {
                let noise: f32 = StandardNormal.sample(&mut rng);
                data.push(noise + if j % k == l { sep } else { 0.0 });
            }
        }
        (FeatureMatrix::from_vec(n, d, data).unwrap(), labels)
    }

    fn run(x: &FeatureMatrix, labels: Vec<usize>, k: usize, seed: u64, cfg: &ProbeConfig) -> ProbeResult {
        let names: Vec<String> = (1..=k).map(|t| format!("T{t}")).collect();
        let names: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let groups = (0..labels.len()).map(|i| format!("g{}", i / 4)).collect();
        let rows = rows_for(Task::Tone, &names, labels, groups);
        let spec = SplitSpec::new(ExclusionKey::PhonemeString, 0.2, seed).unwrap();
        let split = make_exclusive_split(&rows.group_keys, &rows.labels, &rows.class_names, spec).unwrap();
        let ds = ProbeDataset::new(x, &rows, &split).unwrap();
        train_ridge_probe(&ds, cfg).unwrap()
    }

    #[test]
    fn separable_blobs_are_perfect() {
        let (x, labels) = blobs(200, 5, 2, 12.0, 1);
        let r = run(&x, labels, 2, 3, &ProbeConfig::default());
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.correct(), r.test_n);
    }

    #[test]
    fn shuffled_labels_sit_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut accs = Vec::new();
        for rep in 0..10 {
            let (x, _) = blobs(2000, 16, 4, 0.0, 100 + rep);
            let labels: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
            accs.push(run(&x, labels, 4, rep, &ProbeConfig::default()).accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.25).abs() <= 0.03, "mean accuracy {mean}");
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let (x, labels) = blobs(240, 6, 3, 1.0, 5);
        let r = run(&x, labels.clone(), 3, 8, &ProbeConfig::default());
        let total: usize = r.confusion.iter().flatten().sum();
        assert_eq!(total, r.test_n);
        assert_eq!(r.accuracy, r.correct() as f64 / r.test_n as f64);
    }

    #[test]
    fn reproducible() {
        let (x, labels) = blobs(300, 8, 4, 0.7, 6);
        let cfg = ProbeConfig { seed: 4, ..Default::default() };
        let a = run(&x, labels.clone(), 4, 2, &cfg);
        let b = run(&x, labels, 4, 2, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn rescaled_alpha_keeps_predictions() {
        let (x, labels) = blobs(300, 6, 3, 0.8, 7);
        let c = 4.0f32;
        for alpha in [1e-2, 1.0, 10.0] {
            let cfg = ProbeConfig { alphas: vec![alpha], ..Default::default() };
            let cfg_c = ProbeConfig { alphas: vec![alpha * (c as f64).powi(2)], ..Default::default() };
            let a = run(&x, labels.clone(), 3, 1, &cfg);
            let b = run(&x.scaled(c), labels.clone(), 3, 1, &cfg_c);
            assert_eq!(a.confusion, b.confusion);
        }
    }

    #[test]
    fn dual_path_runs_when_dims_exceed_rows() {
        let (x, labels) = blobs(60, 100, 2, 3.0, 8);
        let r = run(&x, labels, 2, 5, &ProbeConfig::default());
        assert!(r.accuracy >= 0.9, "{}", r.accuracy);
    }

    #[test]
    fn pair_probe_on_blobs() {
        let (x, labels) = blobs(400, 8, 4, 10.0, 9);
        let groups = (0..400).map(|i| format!("g{}", i / 4)).collect();
        let rows = rows_for(Task::Tone, &["T1", "T2", "T3", "T4"], labels, groups);
        let split = rows
            .split(SplitSpec::new(ExclusionKey::PhonemeString, 0.2, 1).unwrap())
            .unwrap();
        let ds = ProbeDataset::new(&x, &rows, &split).unwrap();
        let cfg = ProbeConfig::default();
        let r = evaluate_pair_probe(&ds, 1, 3, &cfg).unwrap();
        assert_eq!(r.class_names, ["T1", "T3"]);
        assert_eq!(r.accuracy, 1.0);
        assert!(evaluate_pair_probe(&ds, 1, 1, &cfg).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..103).map(|i| i % 3).collect();
        let fold = stratified_folds(&labels, 3, 5, 0).unwrap();
        for f in 0..5 {
            for c in 0..3 {
                let n = (0..103).filter(|&i| fold[i] == f && labels[i] == c).count();
                assert!((6..=8).contains(&n), "fold {f} class {c}: {n}");
            }
        }
        assert!(stratified_folds(&[0, 1, 0], 2, 5, 0).is_err());
    }
}
