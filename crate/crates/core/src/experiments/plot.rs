//! Minimal SVG line charts for reports. Presentation only.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::analysis::{best_layer, layer_curve};
use super::report::ExperimentReport;
use super::BASELINE_MODEL;
use crate::features::{BaselineKind, CheckpointStep};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 200.0, 40.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accuracy (y in [0, 1]) against an integer-ish x axis.
pub fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{ml}" y="24" font-size="14">{}</text>"#, escape(title));
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{ml}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"##,
            ml + pw,
            sy(y),
            sy(y),
            ml - 6.0,
            sy(y) + 4.0
        );
    }
    let ticks = 6.min((x1 - x0).round() as usize).max(1);
    for i in 0..=ticks {
        let x = x0 + (x1 - x0) * i as f64 / ticks as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            mt + ph + 18.0,
            x.round()
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = mt + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ml + pw + 12.0,
            ml + pw + 32.0,
            ml + pw + 38.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Accuracy against layer for every model, checkpoint and task of one
/// experiment, with baselines as dashed horizontal lines.
pub fn layer_plot(report: &ExperimentReport, experiment: &str) -> Option<String> {
    let rows: Vec<_> = report.rows().filter(|r| r.experiment == experiment).collect();
    let mut keys: Vec<(String, CheckpointStep, crate::probe::Task)> = rows
        .iter()
        .filter(|r| r.model_id != BASELINE_MODEL)
        .filter_map(|r| Some((r.model_id.clone(), r.step()?, r.task()?)))
        .collect();
    keys.sort();
    keys.dedup();
    let sub = ExperimentReport::from_rows(rows.iter().map(|r| (*r).clone()));
    let mut series: Vec<Series> = keys
        .iter()
        .map(|(m, s, t)| Series {
            label: format!("{m}@{s} {}", t.subtask()),
            points: layer_curve(&sub, m, Some(*s), *t)
                .into_iter()
                .map(|(l, a)| (l as f64, a))
                .collect(),
            dashed: false,
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let max_layer = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(0.0, f64::max);
    for r in rows.iter().filter(|r| r.model_id == BASELINE_MODEL && !r.is_absent()) {
        if let Some(kind) = BaselineKind::from_pseudo_layer(r.layer_index) {
            let a = r.accuracy.expect("present");
            series.push(Series {
                label: format!("{} {}", kind.as_str(), r.subtask),
                points: vec![(0.0, a), (max_layer, a)],
                dashed: true,
            });
        }
    }
    if series.is_empty() {
        return None;
    }
    Some(line_chart(&format!("{experiment}: accuracy by layer"), "layer", &series))
}

/// Best-layer accuracy against training step, one line per model and task.
pub fn step_plot(report: &ExperimentReport, experiment: &str) -> Option<String> {
    let mut curves: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    let sub = ExperimentReport::from_rows(report.rows().filter(|r| r.experiment == experiment).cloned());
    let mut keys: Vec<_> = sub
        .rows()
        .filter(|r| r.model_id != BASELINE_MODEL)
        .filter_map(|r| Some((r.model_id.clone(), r.step()?, r.task()?)))
        .collect();
    keys.sort();
    keys.dedup();
    for (m, s, t) in keys {
        let CheckpointStep::Step(step) = s else { continue };
        if let Some((_, a)) = best_layer(&layer_curve(&sub, &m, Some(s), t)) {
            curves
                .entry((m, t.to_string()))
                .or_default()
                .push((step as f64, a));
        }
    }
    if curves.values().all(|c| c.len() < 2) {
        return None;
    }
    let series: Vec<Series> = curves
        .into_iter()
        .map(|((m, t), points)| Series {
            label: format!("{m} {t}"),
            points,
            dashed: false,
        })
        .collect();
    Some(line_chart(&format!("{experiment}: best layer by step"), "training step", &series))
}
