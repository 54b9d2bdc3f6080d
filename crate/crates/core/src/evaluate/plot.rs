//! Deterministic SVG rendering: prediction timelines and importance bars.
//!
//! Output is plain SVG 1.1 assembled by string formatting with fixed
//! precision, so identical inputs always produce identical bytes.

use super::EvalError;
use std::fmt::Write as _;
use std::path::Path;

const PLOT_W: f64 = 800.0;
const PLOT_H: f64 = 240.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 44.0;
const MARGIN_R: f64 = 20.0;

/// Renders a truth-vs-score timeline: shaded bands where the true label is
/// stressed, and the blended score as a polyline over [0, 1].
///
/// `truth` and `scores` are per-second and must have equal lengths.
pub fn render_timeline(truth: &[u8], scores: &[f64], out: &Path) -> Result<(), EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch { pred: scores.len(), truth: truth.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput { detail: "nothing to plot".into() });
    }
    let n = truth.len() as f64;
    let x = |second: f64| MARGIN_L + second / n * PLOT_W;
    let y = |p: f64| MARGIN_T + (1.0 - p.clamp(0.0, 1.0)) * PLOT_H;

    let mut svg = svg_open(MARGIN_L + PLOT_W + MARGIN_R, MARGIN_T + PLOT_H + MARGIN_B);

    // Stress bands: one rect per contiguous truth == 1 span.
    let mut i = 0;
    while i < truth.len() {
        if truth[i] == 1 {
            let start = i;
            while i < truth.len() && truth[i] == 1 {
                i += 1;
            }
            let _ = write!(
                svg,
                "<rect class=\"stress\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#f2c4bd\"/>",
                x(start as f64),
                MARGIN_T,
                x(i as f64) - x(start as f64),
                PLOT_H
            );
        } else {
            i += 1;
        }
    }

    // Axes and the three reference ticks on y.
    let _ = write!(
        svg,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444444\"/>",
        MARGIN_L, MARGIN_T, PLOT_W, PLOT_H
    );
    for (p, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y0:.2}\" x2=\"{:.2}\" y2=\"{y0:.2}\" stroke=\"#bbbbbb\" stroke-dasharray=\"3 3\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444444\">{label}</text>",
            MARGIN_L,
            MARGIN_L + PLOT_W,
            MARGIN_L - 6.0,
            y(p) + 4.0,
            y0 = y(p),
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#444444\">time (s)</text>\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"start\" fill=\"#444444\">0</text>\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444444\">{}</text>",
        MARGIN_L + PLOT_W / 2.0,
        MARGIN_T + PLOT_H + 30.0,
        MARGIN_L,
        MARGIN_T + PLOT_H + 16.0,
        MARGIN_L + PLOT_W,
        MARGIN_T + PLOT_H + 16.0,
        truth.len()
    );

    // Score polyline, one point per second at the second's left edge.
    let mut points = String::new();
    for (s, &p) in scores.iter().enumerate() {
        let _ = write!(points, "{:.2},{:.2} ", x(s as f64), y(p));
    }
    let _ = write!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#3b6fd4\" stroke-width=\"1.5\"/>",
        points.trim_end()
    );

    svg.push_str("</svg>\n");
    std::fs::write(out, svg).map_err(|source| EvalError::Io { path: out.into(), source })
}

/// Renders the top `k` feature importances as horizontal bars, widest first.
pub fn render_importance(
    importances: &[(String, f64)],
    k: usize,
    out: &Path,
) -> Result<(), EvalError> {
    if importances.is_empty() {
        return Err(EvalError::EmptyInput { detail: "no importances to plot".into() });
    }
    let mut rows: Vec<&(String, f64)> = importances.iter().collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k.max(1));
    let max = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max).max(1e-12);

    let bar_h = 18.0;
    let gap = 8.0;
    let label_w = 140.0;
    let height = MARGIN_T * 2.0 + rows.len() as f64 * (bar_h + gap);
    let mut svg = svg_open(label_w + PLOT_W + MARGIN_R, height);
    for (i, (name, value)) in rows.iter().enumerate() {
        let top = MARGIN_T + i as f64 * (bar_h + gap);
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444444\">{}</text>\
             <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{bar_h}\" fill=\"#3b6fd4\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"start\" fill=\"#444444\">{:.3}</text>",
            label_w - 8.0,
            top + bar_h - 5.0,
            escape(name),
            label_w,
            top,
            (value / max) * (PLOT_W - 60.0),
            label_w + (value / max) * (PLOT_W - 60.0) + 6.0,
            top + bar_h - 5.0,
            value,
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(out, svg).map_err(|source| EvalError::Io { path: out.into(), source })
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\
         <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>"
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Spreads per-window probabilities back over seconds for plotting: each
/// window's span holds its probability; leading or dropped seconds hold the
/// nearest preceding value (0.5 before the first window).
pub fn expand_to_seconds(
    window_starts: &[u32],
    probs: &[f64],
    window_s: usize,
    total_s: usize,
) -> Vec<f64> {
    let mut out = vec![0.5; total_s];
    let mut filled_to = 0usize;
    for (&start, &p) in window_starts.iter().zip(probs) {
        let start = start as usize;
        let end = (start + window_s).min(total_s);
        // Hold the previous value across any gap the windows skipped.
        if start > filled_to && filled_to > 0 {
            let hold = out[filled_to - 1];
            for v in &mut out[filled_to..start] {
                *v = hold;
            }
        }
        for v in &mut out[start.min(total_s)..end] {
            *v = p;
        }
        filled_to = end;
    }
    if filled_to > 0 && filled_to < total_s {
        let hold = out[filled_to - 1];
        for v in &mut out[filled_to..] {
            *v = hold;
        }
    }
    out
}
