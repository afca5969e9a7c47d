//! Ordinal summaries of finished reports: best layers, final-layer drops,
//! fine-tuning deltas and cross-model contrast gaps.

use std::collections::BTreeMap;

use super::report::{ExperimentReport, FinetuneDelta, ReportRow};
use super::BASELINE_MODEL;
use crate::features::{BaselineKind, CheckpointStep};
use crate::probe::{Task, CONSONANT_GROUPS, TONE_PAIRS};

/// Pass/fail with the numbers behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Verdict { pass, detail }
    }
}

fn matches(r: &ReportRow, model_id: &str, step: Option<CheckpointStep>, task: Task) -> bool {
    r.model_id == model_id
        && r.task() == Some(task)
        && step.is_none_or(|s| r.step() == Some(s))
        && !r.is_absent()
}

/// Accuracy per encoder layer (index ≥ 0). With `step = None` the rows of
/// every checkpoint are eligible and the latest checkpoint wins per layer.
pub fn layer_curve(
    report: &ExperimentReport,
    model_id: &str,
    step: Option<CheckpointStep>,
    task: Task,
) -> Vec<(i32, f64)> {
    let mut best: BTreeMap<i32, (Option<CheckpointStep>, f64)> = BTreeMap::new();
    for r in report.rows().filter(|r| r.layer_index >= 0 && matches(r, model_id, step, task)) {
        let acc = r.accuracy.expect("present");
        let entry = best.entry(r.layer_index).or_insert((r.step(), acc));
        if r.step() > entry.0 {
            *entry = (r.step(), acc);
        }
    }
    best.into_iter().map(|(l, (_, a))| (l, a)).collect()
}

/// Highest accuracy; ties go to the lower layer.
pub fn best_layer(curve: &[(i32, f64)]) -> Option<(i32, f64)> {
    let mut best: Option<(i32, f64)> = None;
    for &(l, a) in curve {
        match best {
            Some((bl, ba)) if a < ba || (a == ba && l > bl) => {}
            _ => best = Some((l, a)),
        }
    }
    best
}

/// Max-over-layers accuracy minus the last layer's accuracy.
pub fn final_layer_drop(curve: &[(i32, f64)]) -> Option<f64> {
    let (_, best) = best_layer(curve)?;
    let (_, last) = curve.iter().max_by_key(|(l, _)| *l)?;
    Some(best - last)
}

pub fn baseline_accuracy(report: &ExperimentReport, kind: BaselineKind, task: Task) -> Option<f64> {
    report
        .rows()
        .find(|r| {
            r.model_id == BASELINE_MODEL
                && r.layer_index == kind.pseudo_layer()
                && r.task() == Some(task)
                && !r.is_absent()
        })
        .and_then(|r| r.accuracy)
}

/// Per-layer `finetuned - pretrained` on layers both models report.
pub fn finetune_deltas(
    report: &ExperimentReport,
    experiment: &str,
    pretrained: &str,
    finetuned: &str,
    task: Task,
) -> Vec<FinetuneDelta> {
    let curve = |model: &str| -> BTreeMap<i32, (String, f64)> {
        report
            .rows()
            .filter(|r| r.experiment == experiment && r.layer_index >= 0 && matches(r, model, None, task))
            .map(|r| (r.layer_index, (r.corpus.clone(), r.accuracy.expect("present"))))
            .collect()
    };
    let pre = curve(pretrained);
    let ft = curve(finetuned);
    pre.iter()
        .filter_map(|(l, (corpus, p))| {
            ft.get(l).map(|(_, f)| FinetuneDelta {
                experiment: experiment.to_string(),
                corpus: corpus.clone(),
                task: task.name().to_string(),
                subtask: task.subtask(),
                pretrained_model: pretrained.to_string(),
                finetuned_model: finetuned.to_string(),
                layer_index: *l,
                pretrained_accuracy: *p,
                finetuned_accuracy: *f,
                delta: f - p,
            })
        })
        .collect()
}

/// Mean delta over layers `ceil(n/2)..=n`, `n` the highest layer index.
pub fn upper_half_mean_delta(deltas: &[FinetuneDelta]) -> Option<f64> {
    let n = deltas.iter().map(|d| d.layer_index).max()?;
    let lo = (n + 1) / 2;
    let upper: Vec<f64> = deltas
        .iter()
        .filter(|d| d.layer_index >= lo)
        .map(|d| d.delta)
        .collect();
    Some(upper.iter().sum::<f64>() / upper.len() as f64)
}

/// Best-layer accuracy of `a` minus that of `b` for each task both report.
fn best_layer_gaps(
    report: &ExperimentReport,
    a: &str,
    b: &str,
    tasks: impl Iterator<Item = Task>,
) -> Vec<(Task, f64)> {
    tasks
        .filter_map(|t| {
            let (_, acc_a) = best_layer(&layer_curve(report, a, None, t))?;
            let (_, acc_b) = best_layer(&layer_curve(report, b, None, t))?;
            Some((t, acc_a - acc_b))
        })
        .collect()
}

/// Tone pairs ranked by `tonal - non_tonal` best-layer accuracy, largest
/// gap first; equal gaps keep pair order.
pub fn pair_gap_ranking(report: &ExperimentReport, tonal: &str, non_tonal: &str) -> Vec<(Task, f64)> {
    let pairs = TONE_PAIRS.iter().map(|&(a, b)| Task::TonePair { a, b });
    let mut gaps = best_layer_gaps(report, tonal, non_tonal, pairs);
    gaps.sort_by(|x, y| y.1.total_cmp(&x.1));
    gaps
}

/// `|tonal - non_tonal|` best-layer accuracy per consonant group.
pub fn group_gaps(report: &ExperimentReport, tonal: &str, non_tonal: &str) -> Vec<(u8, f64)> {
    let groups = CONSONANT_GROUPS.iter().map(|&(group, _)| Task::ConsonantGroup { group });
    best_layer_gaps(report, tonal, non_tonal, groups)
        .into_iter()
        .map(|(t, g)| match t {
            Task::ConsonantGroup { group } => (group, g.abs()),
            _ => unreachable!(),
        })
        .collect()
}

/// Best layer and its accuracy at each checkpoint of `model_id`.
pub fn trajectory(report: &ExperimentReport, model_id: &str, task: Task) -> Vec<(CheckpointStep, i32, f64)> {
    let mut steps: Vec<CheckpointStep> = report
        .rows()
        .filter(|r| matches(r, model_id, None, task))
        .filter_map(|r| r.step())
        .collect();
    steps.sort();
    steps.dedup();
    steps
        .into_iter()
        .filter_map(|s| {
            let (l, a) = best_layer(&layer_curve(report, model_id, Some(s), task))?;
            Some((s, l, a))
        })
        .collect()
}

/// Every transformer layer (index ≥ 1) of each model beats the MFCC
/// baseline, which beats the text baseline.
pub fn check_baseline_ordering(report: &ExperimentReport, models: &[&str], task: Task) -> Verdict {
    let (Some(mfcc), Some(text)) = (
        baseline_accuracy(report, BaselineKind::Mfcc, task),
        baseline_accuracy(report, BaselineKind::Text, task),
    ) else {
        return Verdict::new(false, "baseline rows missing".into());
    };
    let mut failures = Vec::new();
    for m in models {
        let curve = layer_curve(report, m, None, task);
        if curve.iter().all(|(l, _)| *l < 1) {
            failures.push(format!("{m}: no layers"));
        }
        for (l, a) in curve.iter().filter(|(l, _)| *l >= 1) {
            if *a <= mfcc {
                failures.push(format!("{m} layer {l} {a:.4} <= mfcc {mfcc:.4}"));
            }
        }
    }
    let pass = failures.is_empty() && mfcc > text;
    let mut detail = format!("mfcc {mfcc:.4} text {text:.4}");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    Verdict::new(pass, detail)
}

/// The non-tonal model loses more accuracy in its final layer than the
/// tonal one.
pub fn check_final_drop(report: &ExperimentReport, tonal: &str, non_tonal: &str, task: Task) -> Verdict {
    let t = final_layer_drop(&layer_curve(report, tonal, None, task));
    let n = final_layer_drop(&layer_curve(report, non_tonal, None, task));
    match (t, n) {
        (Some(t), Some(n)) => Verdict::new(n > t, format!("drop {non_tonal} {n:.4} vs {tonal} {t:.4}")),
        _ => Verdict::new(false, "layer curves missing".into()),
    }
}

/// Fine-tuning helps the tonal model's upper layers and hurts the
/// non-tonal model's.
pub fn check_finetune_signs(tonal: &[FinetuneDelta], non_tonal: &[FinetuneDelta]) -> Verdict {
    match (upper_half_mean_delta(tonal), upper_half_mean_delta(non_tonal)) {
        (Some(t), Some(n)) => Verdict::new(
            t > 0.0 && n < 0.0,
            format!("upper-half mean delta tonal {t:+.4} non-tonal {n:+.4}"),
        ),
        _ => Verdict::new(false, "fine-tuning deltas missing".into()),
    }
}

/// T1-T4 and T2-T3 hold the two largest tonal-minus-non-tonal gaps.
pub fn check_pair_ranking(report: &ExperimentReport, tonal: &str, non_tonal: &str) -> Verdict {
    let ranking = pair_gap_ranking(report, tonal, non_tonal);
    let shown: Vec<String> = ranking.iter().map(|(t, g)| format!("{} {g:+.4}", t.subtask())).collect();
    if ranking.len() < 6 {
        return Verdict::new(false, format!("only {} pairs: {}", ranking.len(), shown.join(", ")));
    }
    let top: Vec<Task> = ranking[..2].iter().map(|(t, _)| *t).collect();
    let pass = top.contains(&Task::TonePair { a: 1, b: 4 }) && top.contains(&Task::TonePair { a: 2, b: 3 });
    Verdict::new(pass, shown.join(", "))
}

/// Group 1's cross-model gap exceeds those of groups 2 and 3.
pub fn check_group_gaps(report: &ExperimentReport, tonal: &str, non_tonal: &str) -> Verdict {
    let gaps: BTreeMap<u8, f64> = group_gaps(report, tonal, non_tonal).into_iter().collect();
    let detail = gaps
        .iter()
        .map(|(g, v)| format!("g{g} {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    match (gaps.get(&1), gaps.get(&2), gaps.get(&3)) {
        (Some(g1), Some(g2), Some(g3)) => Verdict::new(g1 > g2 && g1 > g3, detail),
        _ => Verdict::new(false, format!("groups missing: {detail}")),
    }
}
