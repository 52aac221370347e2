//! Static SVG charts: mean-return curves with bootstrap bands, and
//! per-score-bucket TD-percentage-error lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{aggregate_runs, mean, Curve, Metric, RunRecord};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Blue (t = 0) to red (t = 1).
pub fn blue_to_red(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 215.0 * t).round() as u8;
    let g = (60.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8;
    let b = (255.0 - 215.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, mut y0: f64, mut y1: f64) -> Self {
        if !(y1 > y0) {
            let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.1 };
            y0 -= pad;
            y1 += pad;
        }
        let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(svg: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (x, y) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom}" x2="{x:.1}" y2="{}" stroke="#444"/><text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.1}" x2="{left}" y2="{y:.1}" stroke="#444"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn polyline(points: &[(f64, f64)], f: &Frame, color: &str, class: &str, label: &str) -> String {
    let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let values: Vec<String> = points.iter().map(|&(_, y)| format!("{y}")).collect();
    format!(
        r#"<polyline class="{class}" data-label="{}" data-values="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
        escape(label),
        values.join(" "),
        coords.join(" ")
    )
}

fn legend(svg: &mut String, entries: &[(String, String)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * k as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            x + 18.0,
            x + 24.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// Mean-return curves (one per agent) with +-1 std bootstrap bands.
pub fn return_curves_svg(curves: &[Curve], title: &str) -> String {
    let points = curves.iter().flat_map(|c| &c.points);
    let (mut x1, mut y0, mut y1) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x1 = x1.max(p.frame as f64);
        y0 = y0.min(p.lower);
        y1 = y1.max(p.upper);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    let f = Frame::new(0.0, x1, y0, y1);
    let metric = curves.first().map_or(Metric::Return, |c| c.metric);
    let mut svg = String::new();
    header(&mut svg, title, "frames", &format!("mean {}", metric.label()), &f);
    let mut entries = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if c.points.is_empty() {
            continue;
        }
        let upper: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", f.px(p.frame as f64), f.py(p.upper))).collect();
        let lower: Vec<String> = c
            .points
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", f.px(p.frame as f64), f.py(p.lower)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<(f64, f64)> = c.points.iter().map(|p| (p.frame as f64, p.mean)).collect();
        let _ = writeln!(svg, "{}", polyline(&line, &f, color, "mean", &c.agent));
        entries.push((c.agent.clone(), color.to_string()));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// TD-percentage-error lines, one per score bucket, averaged over seeds,
/// colored blue (low score) to red (high score).
pub fn td_error_svg(records: &[&RunRecord], num_buckets: usize, title: &str) -> String {
    // bucket -> frame -> values across seeds
    let mut series: BTreeMap<u32, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        for t in &r.td_errors {
            series.entry(t.bucket).or_default().entry(t.frame).or_default().push(t.value);
        }
    }
    let mut lines: Vec<(u32, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(b, by_frame)| (b, by_frame.into_iter().map(|(fr, v)| (fr as f64, mean(&v) * 100.0)).collect()))
        .collect();
    lines.sort_by_key(|(b, _)| *b);
    let all = lines.iter().flat_map(|(_, l)| l);
    let (mut x1, mut y1) = (0.0f64, 0.0f64);
    for &(x, y) in all {
        x1 = x1.max(x);
        if y.is_finite() {
            y1 = y1.max(y);
        }
    }
    let f = Frame::new(0.0, x1, 0.0, y1);
    let mut svg = String::new();
    header(&mut svg, title, "frames", "TD error (% of mean |target|)", &f);
    let denom = num_buckets.saturating_sub(1).max(1) as f64;
    let mut entries = Vec::new();
    for (b, line) in &lines {
        let color = blue_to_red(*b as f64 / denom);
        let _ = writeln!(svg, "{}", polyline(line, &f, &color, "bucket", &format!("score {b}")));
    }
    // color key covering every bucket, data or not
    let step = num_buckets.div_ceil(12).max(1);
    for b in (0..num_buckets).step_by(step) {
        entries.push((format!("score {b}"), blue_to_red(b as f64 / denom)));
    }
    legend(&mut svg, &entries);
    let _ = writeln!(svg, r#"<desc>buckets={num_buckets}</desc>"#);
    svg.push_str("</svg>\n");
    svg
}

/// Writes `returns_<env>.svg` per environment and `td_<env>_<agent>.svg`
/// per agent with telemetry. `num_buckets` defaults to the highest bucket
/// seen plus one.
pub fn write_plots(
    records: &[RunRecord],
    out: &Path,
    window: u64,
    metric: Metric,
    num_buckets: Option<usize>,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::EmptyInput(out.to_path_buf()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut envs: Vec<&str> = records.iter().map(|r| r.env.as_str()).collect();
    envs.dedup();
    envs.sort_unstable();
    envs.dedup();
    for env in envs {
        let group: Vec<RunRecord> = records.iter().filter(|r| r.env == env).cloned().collect();
        let curves = aggregate_runs(&group, window, metric);
        let path = out.join(format!("returns_{env}.svg"));
        let svg = return_curves_svg(&curves, &format!("{env}: mean {}", metric.label()));
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);

        let mut agents: Vec<&str> = group.iter().map(|r| r.agent.as_str()).collect();
        agents.sort_unstable();
        agents.dedup();
        for agent in agents {
            let runs: Vec<&RunRecord> = group.iter().filter(|r| r.agent == agent).collect();
            if runs.iter().all(|r| r.td_errors.is_empty()) {
                continue;
            }
            let buckets = num_buckets.unwrap_or_else(|| {
                runs.iter().flat_map(|r| &r.td_errors).map(|t| t.bucket as usize + 1).max().unwrap_or(1)
            });
            let path = out.join(format!("td_{env}_{agent}.svg"));
            let svg = td_error_svg(&runs, buckets, &format!("{env} / {agent}: TD error by player score"));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EpisodeRow, TdRow};

    #[test]
    fn colormap_endpoints() {
        assert_eq!(blue_to_red(0.0), "#2800ff");
        assert_eq!(blue_to_red(1.0), "#ff0028");
    }

    #[test]
    fn flat_curve_renders_flat() {
        let mut r = RunRecord::new(0, "a", "e");
        for k in 1..=10 {
            r.episodes.push(EpisodeRow {
                frame: k * 100,
                raw_return: 2.5,
                unexponentiated_return: 0.0,
                max_phase: 0,
                phase_b_catches: 0,
                length: 100,
            });
        }
        let svg = return_curves_svg(&aggregate_runs(&[r], 100, Metric::Return), "t");
        let line = svg.lines().find(|l| l.contains(r#"class="mean""#)).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert_eq!(ys.len(), 10);
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn td_plot_has_one_line_per_bucket() {
        let mut r = RunRecord::new(0, "a", "e");
        for b in 0..5 {
            r.td_errors.push(TdRow {
                frame: 1000,
                bucket: b,
                value: 0.1 * b as f64,
            });
        }
        let svg = td_error_svg(&[&r], 5, "t");
        assert_eq!(svg.matches(r#"class="bucket""#).count(), 5);
        assert!(svg.contains("<desc>buckets=5</desc>"));
    }
}
