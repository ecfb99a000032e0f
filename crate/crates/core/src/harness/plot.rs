use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::log::RunLog;
use super::run::mean_std;

/// Mean and population std across seeds at one eval step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub env_steps: u64,
    pub mean: f64,
    pub std: f64,
}

/// A curve to draw: one config, all its seeds.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub logs: Vec<RunLog>,
}

pub fn aggregate(logs: &[RunLog]) -> Result<Vec<AggregatePoint>> {
    let Some(first) = logs.first() else {
        return Err(Error::Alignment("no run logs to aggregate".into()));
    };
    for log in &logs[1..] {
        if log.records.len() != first.records.len() {
            return Err(Error::Alignment(format!(
                "seed {} has {} eval points but seed {} has {}",
                log.seed,
                log.records.len(),
                first.seed,
                first.records.len()
            )));
        }
        for (a, b) in first.records.iter().zip(&log.records) {
            if a.env_steps != b.env_steps {
                return Err(Error::Alignment(format!(
                    "seed {} evaluated at step {} where seed {} evaluated at step {}",
                    log.seed, b.env_steps, first.seed, a.env_steps
                )));
            }
        }
    }
    Ok((0..first.records.len())
        .map(|k| {
            let vals: Vec<f64> = logs.iter().map(|l| l.records[k].eval_mean).collect();
            let (mean, std) = mean_std(&vals);
            AggregatePoint {
                env_steps: first.records[k].env_steps,
                mean,
                std,
            }
        })
        .collect())
}

pub fn aggregate_csv(points: &[AggregatePoint]) -> String {
    let mut s = String::from("env_steps,mean,std\n");
    for p in points {
        let _ = writeln!(s, "{},{:?},{:?}", p.env_steps, p.mean, p.std);
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart with a ±std band per series and optional dashed reference lines.
pub fn render_svg(curves: &[(String, Vec<AggregatePoint>)], references: &[(&str, f64)]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x_max = curves
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.env_steps))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, pts) in curves {
        for p in pts {
            y_lo = y_lo.min(p.mean - p.std);
            y_hi = y_hi.max(p.mean + p.std);
        }
    }
    for (_, v) in references {
        y_lo = y_lo.min(*v);
        y_hi = y_hi.max(*v);
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_hi - y_lo < 1e-9 {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let fx = k as f64 / 4.0;
        let x = left + pw * fx;
        let y = top + ph * (1.0 - fx);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            top + ph + 16.0,
            x_max * fx
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            left - 6.0,
            y + 4.0,
            y_lo + (y_hi - y_lo) * fx
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment steps</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">evaluation return</text>"#,
        top + ph / 2.0
    );
    for (name, v) in references {
        let y = sy(*v);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" x2="{:.1}" y1="{y:.2}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" fill="gray">{name} ({v})</text>"#,
            left + pw + 6.0,
            y + 4.0
        );
    }
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.is_empty() {
            continue;
        }
        let upper: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.env_steps as f64), sy(p.mean + p.std)))
            .collect();
        let lower: Vec<String> = pts
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", sx(p.env_steps as f64), sy(p.mean - p.std)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.env_steps as f64), sy(p.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = top + 16.0 * (i as f64 + references.len() as f64 + 1.0) + 40.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#,
            left + pw + 6.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<out>.svg` plus one `<stem>_<label>.csv` per series. Returns all paths written.
pub fn aggregate_and_plot(series: &[Series], references: &[(&str, f64)], out: &Path) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(Error::Alignment("nothing to plot".into()));
    }
    let mut curves = Vec::with_capacity(series.len());
    let mut written = Vec::new();
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in series {
        let points = aggregate(&s.logs).map_err(|e| match e {
            Error::Alignment(m) => Error::Alignment(format!("{}: {m}", s.label)),
            other => other,
        })?;
        let safe: String = s
            .label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let csv = dir.join(format!("{stem}_{safe}.csv"));
        std::fs::write(&csv, aggregate_csv(&points)).map_err(|e| Error::io(&csv, e))?;
        written.push(csv);
        curves.push((s.label.clone(), points));
    }
    let svg = out.with_extension("svg");
    std::fs::write(&svg, render_svg(&curves, references)).map_err(|e| Error::io(&svg, e))?;
    written.push(svg);
    Ok(written)
}
