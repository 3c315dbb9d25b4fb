//! Run outputs: trajectory CSV, a JSON metadata sidecar and an SVG line plot
//! with one polyline per agent (time on x, opinion on y).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::AgentId;
use crate::harness::{RunSummary, ScenarioOutcome, ScenarioSpec};
use crate::trajectory::EventRecord;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// One polyline: `(step, opinion)` points in increasing step order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Groups `(step, agent, opinion)` rows into one series per agent, in id
/// order. Interior points on flat stretches are dropped.
pub fn agent_series(rows: &[(u64, AgentId, f64)]) -> Vec<Series> {
    let mut by_agent: BTreeMap<AgentId, Vec<(f64, f64)>> = BTreeMap::new();
    for &(step, agent, x) in rows {
        by_agent.entry(agent).or_default().push((step as f64, x));
    }
    by_agent
        .into_iter()
        .map(|(agent, pts)| {
            let points = pts
                .iter()
                .enumerate()
                .filter(|&(i, p)| {
                    i == 0 || i + 1 == pts.len() || pts[i - 1].1 != p.1 || pts[i + 1].1 != p.1
                })
                .map(|(_, p)| *p)
                .collect();
            Series {
                label: format!("agent {agent}"),
                points,
            }
        })
        .collect()
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = hi - lo;
    if span <= 0.0 || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Hand-rolled SVG line chart.
pub fn svg_line_plot(series: &[Series], title: &str) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) =
        (0.0f64, 1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.04 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x_lo, x_hi, 8) {
        let x = sx(t);
        let y = MARGIN_TOP + plot_h;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y + 5.0,
            y + 18.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">opinion</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let mut pts = String::new();
        for &(x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"><title>{}</title></polyline>"#,
            PALETTE[i % PALETTE.len()],
            pts.trim_end(),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// JSON sidecar written next to a run's CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata<'a> {
    pub scenario: &'a ScenarioSpec,
    pub summary: &'a RunSummary,
    pub events: &'a [EventRecord],
    pub csv_columns: [&'static str; 3],
}

pub fn metadata_json(spec: &ScenarioSpec, outcome: &ScenarioOutcome) -> String {
    let meta = RunMetadata {
        scenario: spec,
        summary: &outcome.summary,
        events: outcome.trajectory.events(),
        csv_columns: ["step", "agent_id", "opinion"],
    };
    serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"
}

pub fn outcome_svg(spec: &ScenarioSpec, outcome: &ScenarioOutcome) -> String {
    let title = spec
        .name
        .clone()
        .unwrap_or_else(|| "trajectory".to_string());
    svg_line_plot(&agent_series(&outcome.trajectory.float_rows()), &title)
}

/// Writes `<prefix>.csv`, `<prefix>.json` and `<prefix>.svg`, returning the
/// paths in that order.
pub fn write_run_outputs(
    prefix: &Path,
    spec: &ScenarioSpec,
    outcome: &ScenarioOutcome,
) -> io::Result<Vec<PathBuf>> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let with_ext = |ext: &str| {
        let mut name = prefix.as_os_str().to_owned();
        name.push(".");
        name.push(ext);
        PathBuf::from(name)
    };
    let csv = with_ext("csv");
    let json = with_ext("json");
    let svg = with_ext("svg");
    fs::write(&csv, outcome.trajectory.to_csv())?;
    fs::write(&json, metadata_json(spec, outcome))?;
    fs::write(&svg, outcome_svg(spec, outcome))?;
    Ok(vec![csv, json, svg])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_stretches_are_compressed() {
        let a = AgentId(1);
        let rows: Vec<_> = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(t, &x)| (t as u64, a, x))
            .collect();
        let s = agent_series(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(
            s[0].points,
            vec![(0.0, 0.0), (2.0, 0.0), (3.0, 1.0), (5.0, 1.0)]
        );
    }

    #[test]
    fn svg_has_one_polyline_per_agent() {
        let rows = vec![
            (0, AgentId(1), 0.0),
            (0, AgentId(2), 1.0),
            (1, AgentId(1), 0.5),
            (1, AgentId(2), 1.0),
        ];
        let svg = svg_line_plot(&agent_series(&rows), "a < b");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn constant_data_still_plots() {
        let rows = vec![(0, AgentId(1), 0.4), (3, AgentId(1), 0.4)];
        let svg = svg_line_plot(&agent_series(&rows), "flat");
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn ticks_are_round_numbers() {
        assert_eq!(
            nice_ticks(0.0, 1.0, 5),
            vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
        );
        assert_eq!(tick_label(0.6000000000000001), "0.6");
        assert_eq!(tick_label(-0.0), "0");
    }
}
