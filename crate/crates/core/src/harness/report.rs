//! Report generation: the metrics CSV and two SVG plots.
//!
//! The CSV is the reproducibility artifact: it contains only deterministic
//! quantities (test-split metrics per epoch, structural circuit stats, and
//! the *modeled* epoch cost — never measured wall time), so identical
//! experiment configurations produce byte-identical files. The SVGs are
//! pure functions of the ledgers they are generated from: regenerating
//! from the same ledger files yields byte-identical plots, though the
//! timing plot draws measured wall times, which differ between runs.

use super::experiment::RunLedger;
use super::HarnessError;
use crate::attack::AttackMode;
use crate::circuit::CircuitStats;
use crate::hqnn::LossReport;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub metrics_svg: PathBuf,
    pub timing_svg: PathBuf,
}

/// Gate totals aggregated over a run's circuit templates: summed counts,
/// deepest template.
fn aggregate(stats: &[CircuitStats]) -> (usize, usize, usize) {
    let total = stats.iter().map(|s| s.total_gates).sum();
    let swaps = stats.iter().map(|s| s.swap_count).sum();
    let depth = stats.iter().map(|s| s.depth).max().unwrap_or(0);
    (total, swaps, depth)
}

fn target_class_column(ledger: &RunLedger, report: &LossReport) -> String {
    match &ledger.config.attack {
        Some(a) if a.mode == AttackMode::Targeted => match a.target_class {
            Some(t) if t < report.per_class_accuracy.len() => {
                format!("{}", report.per_class_accuracy[t])
            }
            _ => String::new(),
        },
        _ => String::new(),
    }
}

fn swap_blocks_column(ledger: &RunLedger) -> usize {
    match &ledger.config.attack {
        Some(a) if a.mode == AttackMode::Untargeted => a.swap_blocks,
        _ => 0,
    }
}

/// Builds the metrics CSV for a set of ledgers.
///
/// Each ledger contributes one row per training epoch (test-split metrics)
/// plus one final-evaluation row at `epoch = epochs` carrying the attacked
/// metrics when an attack was configured, or the clean final evaluation
/// otherwise. Epoch rows are labeled `clean` unless the attack ran during
/// training (then the recorded trajectory already went through tampered
/// circuits); the final row always carries the configured mode. The
/// final row's `epoch_seconds` is 0: no training epoch happened there.
pub fn metrics_csv(ledgers: &[RunLedger]) -> String {
    let mut out = String::from(
        "# swaplab metrics v1\n\
         # protocol: full-batch gradient descent, fixed learning rate; mnist inputs are \
         average-pooled (default 4x4 -> 7x7) before angle encoding\n\
         run_id,dataset,mode,swap_blocks,epoch,nll,accuracy,target_class_accuracy,\
         total_gates,swap_count,depth,epoch_seconds\n",
    );
    for ledger in ledgers {
        let dataset = ledger.config.dataset.to_string();
        let mode = ledger.config.mode_label();
        let during_training = ledger
            .config
            .attack
            .as_ref()
            .is_some_and(|a| a.during_training);
        let epoch_mode = if during_training { mode } else { "clean" };
        let (clean_gates, clean_swaps, clean_depth) = aggregate(&ledger.clean_template_stats);
        let attacked_agg = ledger.attacked_template_stats.as_deref().map(aggregate);
        let (epoch_gates, epoch_swaps, epoch_depth) = if during_training {
            attacked_agg.unwrap_or((clean_gates, clean_swaps, clean_depth))
        } else {
            (clean_gates, clean_swaps, clean_depth)
        };
        let swap_blocks = swap_blocks_column(ledger);
        let epoch_blocks = if during_training { swap_blocks } else { 0 };

        for record in &ledger.metrics {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                ledger.run_id,
                dataset,
                epoch_mode,
                epoch_blocks,
                record.epoch,
                record.test.nll,
                record.test.accuracy,
                target_class_column(ledger, &record.test),
                epoch_gates,
                epoch_swaps,
                epoch_depth,
                record.epoch_seconds,
            )
            .expect("string write");
        }

        let final_eval = ledger.attacked_eval.as_ref().unwrap_or(&ledger.clean_eval);
        let (final_gates, final_swaps, final_depth) =
            attacked_agg.unwrap_or((clean_gates, clean_swaps, clean_depth));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},0",
            ledger.run_id,
            dataset,
            mode,
            swap_blocks,
            ledger.config.epochs,
            final_eval.nll,
            final_eval.accuracy,
            target_class_column(ledger, final_eval),
            final_gates,
            final_swaps,
            final_depth,
        )
        .expect("string write");
    }
    out
}

const PLOT_W: f64 = 520.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 48.0;

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"11\">\n"
    )
}

fn text_at(out: &mut String, x: f64, y: f64, content: &str) {
    writeln!(out, "  <text x=\"{x:.2}\" y=\"{y:.2}\">{content}</text>").expect("string write");
}

/// One scatter-and-line panel: y against x with axis labels.
fn panel(out: &mut String, y_offset: f64, title: &str, points: &[(f64, f64, String)], y_max: f64) {
    let x_max = points.iter().map(|p| p.0).fold(1.0_f64, f64::max);
    let plot_w = PLOT_W - 2.0 * MARGIN;
    let plot_h = PANEL_H - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + plot_w * x / x_max;
    let sy = |y: f64| y_offset + PANEL_H - MARGIN - plot_h * y / y_max;

    text_at(out, MARGIN, y_offset + MARGIN - 18.0, title);
    // Axis lines.
    writeln!(
        out,
        "  <path d=\"M {x0:.2} {y0:.2} L {x0:.2} {y1:.2} L {x1:.2} {y1:.2}\" \
         fill=\"none\" stroke=\"black\"/>",
        x0 = MARGIN,
        y0 = y_offset + MARGIN,
        y1 = y_offset + PANEL_H - MARGIN,
        x1 = PLOT_W - MARGIN,
    )
    .expect("string write");
    text_at(out, MARGIN - 36.0, sy(y_max) + 4.0, &format!("{y_max:.2}"));
    text_at(out, MARGIN - 36.0, sy(0.0) + 4.0, "0.00");
    text_at(
        out,
        sx(x_max) - 12.0,
        y_offset + PANEL_H - MARGIN + 16.0,
        &format!("{x_max:.0}"),
    );
    text_at(out, sx(0.0) - 4.0, y_offset + PANEL_H - MARGIN + 16.0, "0");
    text_at(
        out,
        PLOT_W / 2.0 - 40.0,
        y_offset + PANEL_H - 12.0,
        "swap-family gate count",
    );

    if points.len() > 1 {
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                format!(
                    "{} {:.2} {:.2}",
                    if i == 0 { "M" } else { "L" },
                    sx(p.0),
                    sy(p.1)
                )
            })
            .collect();
        writeln!(
            out,
            "  <path d=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
            path.join(" ")
        )
        .expect("string write");
    }
    for (x, y, label) in points {
        writeln!(
            out,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>",
            sx(*x),
            sy(*y)
        )
        .expect("string write");
        text_at(out, sx(*x) + 5.0, sy(*y) - 5.0, label);
    }
}

/// Line plot of final accuracy and NLL against the runs' swap-family gate
/// counts (the Table 1 analogue at desk scale).
pub fn metrics_svg(ledgers: &[RunLedger]) -> String {
    let mut runs: Vec<(f64, f64, f64, String)> = ledgers
        .iter()
        .map(|ledger| {
            let stats = ledger
                .attacked_template_stats
                .as_deref()
                .unwrap_or(&ledger.clean_template_stats);
            let (_, swaps, _) = aggregate(stats);
            let eval = ledger.attacked_eval.as_ref().unwrap_or(&ledger.clean_eval);
            (
                swaps as f64,
                eval.accuracy,
                eval.nll,
                ledger.config.mode_label().to_string(),
            )
        })
        .collect();
    runs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let accuracy_points: Vec<(f64, f64, String)> =
        runs.iter().map(|r| (r.0, r.1, r.3.clone())).collect();
    let nll_max = runs.iter().map(|r| r.2).fold(1.0_f64, f64::max) * 1.1;
    let nll_points: Vec<(f64, f64, String)> =
        runs.iter().map(|r| (r.0, r.2, r.3.clone())).collect();

    let mut out = svg_open(PLOT_W, PANEL_H * 2.0);
    panel(
        &mut out,
        0.0,
        "test accuracy vs swap count",
        &accuracy_points,
        1.0,
    );
    panel(
        &mut out,
        PANEL_H,
        "test NLL vs swap count",
        &nll_points,
        nll_max,
    );
    out.push_str("</svg>\n");
    out
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Box-style summary of per-epoch wall times, one box per run.
pub fn timing_svg(ledgers: &[RunLedger]) -> String {
    let slot_w = 110.0;
    let width = MARGIN * 2.0 + slot_w * ledgers.len() as f64;
    let height = PANEL_H + 40.0;
    let mut out = svg_open(width, height);
    text_at(&mut out, MARGIN, MARGIN - 18.0, "wall seconds per epoch");

    let mut y_max = 0.0_f64;
    let mut summaries = Vec::with_capacity(ledgers.len());
    for ledger in ledgers {
        let mut times: Vec<f64> = ledger.metrics.iter().map(|m| m.wall_seconds).collect();
        times.sort_by(f64::total_cmp);
        let summary = (
            quantile(&times, 0.0),
            quantile(&times, 0.25),
            quantile(&times, 0.5),
            quantile(&times, 0.75),
            quantile(&times, 1.0),
        );
        y_max = y_max.max(summary.4);
        summaries.push(summary);
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    let plot_h = PANEL_H - 2.0 * MARGIN;
    let sy = |v: f64| PANEL_H - MARGIN - plot_h * v / y_max;

    for (i, (ledger, (min, q1, median, q3, max))) in ledgers.iter().zip(summaries).enumerate() {
        let cx = MARGIN + slot_w * (i as f64 + 0.5);
        let box_w = 40.0;
        // Whisker, box, median.
        writeln!(
            out,
            "  <line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            sy(min),
            sy(max)
        )
        .expect("string write");
        writeln!(
            out,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{box_w:.2}\" height=\"{:.2}\" \
             fill=\"lightsteelblue\" stroke=\"black\"/>",
            cx - box_w / 2.0,
            sy(q3),
            (sy(q1) - sy(q3)).max(0.5),
        )
        .expect("string write");
        writeln!(
            out,
            "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
             stroke=\"black\" stroke-width=\"2\"/>",
            cx - box_w / 2.0,
            sy(median),
            cx + box_w / 2.0,
            sy(median)
        )
        .expect("string write");
        let mut label = ledger.run_id.clone();
        label.truncate(16);
        text_at(&mut out, cx - box_w, PANEL_H - MARGIN + 16.0, &label);
        text_at(
            &mut out,
            cx - box_w,
            PANEL_H - MARGIN + 30.0,
            &format!("med {median:.4}s"),
        );
    }
    out.push_str("</svg>\n");
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes `metrics.csv`, `metrics.svg` and `timing.svg` into `out_dir`.
pub fn report(
    ledgers: &[RunLedger],
    out_dir: impl AsRef<Path>,
) -> Result<ReportPaths, HarnessError> {
    if ledgers.is_empty() {
        return Err(HarnessError::NoLedgers);
    }
    for ledger in ledgers {
        ledger.validate()?;
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let paths = ReportPaths {
        csv: out_dir.join("metrics.csv"),
        metrics_svg: out_dir.join("metrics.svg"),
        timing_svg: out_dir.join("timing.svg"),
    };
    write_text(&paths.csv, &metrics_csv(ledgers))?;
    write_text(&paths.metrics_svg, &metrics_svg(ledgers))?;
    write_text(&paths.timing_svg, &timing_svg(ledgers))?;
    Ok(paths)
}
