//! CSV and SVG emission.
//!
//! - records: `algorithm,seed,episode,suboptimality,return,steps,truncated`
//! - curves: `algorithm,episode,mean_<metric>,smoothed_<metric>`
//! - census: `algorithm,seed,start_state,optimal`, then one
//!   `<algorithm>,all,all,<optimal>/<total>` summary row per algorithm
//! - oracle: `state,action,q_star`

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::aggregate::{Aggregate, Curve};
use super::experiment::{Metric, RunRecord};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oracle::OracleResult;
use crate::table::QKey;

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(std::io::BufWriter::new(file), header, rows).map_err(csv_err(path))
}

pub const RECORD_HEADER: [&str; 7] = ["algorithm", "seed", "episode", "suboptimality", "return", "steps", "truncated"];

pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    to_file(path, &RECORD_HEADER, records.iter().map(record_row))
}

fn record_row(r: &RunRecord) -> Vec<String> {
    vec![
        r.label.clone(),
        r.seed.to_string(),
        r.episode.to_string(),
        r.suboptimality.to_string(),
        r.episode_return.to_string(),
        r.steps.to_string(),
        r.truncated.to_string(),
    ]
}

pub fn curves_header(metric: Metric) -> Vec<String> {
    vec![
        "algorithm".into(),
        "episode".into(),
        format!("mean_{}", metric.name()),
        format!("smoothed_{}", metric.name()),
    ]
}

pub fn write_curves_csv(curves: &[Curve], metric: Metric, path: &Path) -> Result<()> {
    let header = curves_header(metric);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = curves.iter().flat_map(|c| {
        c.mean.iter().zip(&c.smoothed).enumerate().map(move |(e, (m, s))| {
            vec![c.label.clone(), e.to_string(), m.to_string(), s.to_string()]
        })
    });
    to_file(path, &header, rows)
}

pub fn write_census_csv(agg: &Aggregate, path: &Path) -> Result<()> {
    let rows = agg
        .census
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.seed.to_string(),
                r.start_state.clone(),
                r.optimal.to_string(),
            ]
        })
        .chain(agg.summary.iter().map(|s| {
            vec![
                s.label.clone(),
                "all".into(),
                "all".into(),
                format!("{}/{}", s.optimal, s.total),
            ]
        }));
    to_file(path, &["algorithm", "seed", "start_state", "optimal"], rows)
}

pub fn write_oracle_csv(env: &dyn Environment, oracle: &OracleResult, path: &Path) -> Result<()> {
    let layout = oracle.layout();
    let rows = layout.keys().map(|k: QKey| {
        vec![
            env.state_label(k.state),
            env.action_label(k.state, k.action),
            oracle.q(k).expect("own layout").to_string(),
        ]
    });
    to_file(path, &["state", "action", "q_star"], rows)
}

/// Reads a curves CSV back. The header must be
/// `algorithm,episode,mean_*,smoothed_*`.
pub fn read_curves_csv(path: &Path) -> Result<(String, Vec<Curve>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let schema_err = |msg: String| Error::Parse {
        line: 1,
        column: 1,
        message: format!("{}: {msg}", path.display()),
    };
    let fields: Vec<&str> = header.iter().collect();
    let metric = match fields.as_slice() {
        ["algorithm", "episode", mean, smoothed] if mean.starts_with("mean_") && smoothed.starts_with("smoothed_") => {
            smoothed.trim_start_matches("smoothed_").to_string()
        }
        _ => return Err(schema_err(format!("unexpected curves header `{}`", fields.join(",")))),
    };
    let mut curves: Vec<Curve> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let line = i + 2;
        let bad = |what: &str| Error::Parse {
            line,
            column: 1,
            message: format!("{}: {what}", path.display()),
        };
        if row.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let label = row[0].to_string();
        let mean: f64 = row[2].parse().map_err(|_| bad("mean is not a number"))?;
        let smoothed: f64 = row[3].parse().map_err(|_| bad("smoothed value is not a number"))?;
        match curves.last_mut() {
            Some(c) if c.label == label => {
                c.mean.push(mean);
                c.smoothed.push(smoothed);
            }
            _ => curves.push(Curve {
                label,
                mean: vec![mean],
                smoothed: vec![smoothed],
            }),
        }
    }
    Ok((metric, curves))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Line chart of the smoothed curves: x = episode, y = smoothed value.
pub fn render_svg(curves: &[Curve], y_label: &str) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 170.0, 30.0, 60.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;

    let n = curves.iter().map(|c| c.smoothed.len()).max().unwrap_or(0);
    let x_max = n.saturating_sub(1).max(1) as f64;
    let values = curves.iter().flat_map(|c| c.smoothed.iter().copied()).filter(|v| v.is_finite());
    let (mut y_min, mut y_max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !y_min.is_finite() {
        y_min = -1.0;
        y_max = 0.0;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let sx = |x: f64| left + x / x_max * plot_w;
    let sy = |y: f64| top + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h,
        top + plot_h
    );
    for t in nice_ticks(0.0, x_max, 8) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            top + plot_h,
            top + plot_h + 5.0,
            top + plot_h + 18.0,
            t
        );
    }
    for t in nice_ticks(y_min, y_max, 6) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left + plot_w,
            left - 8.0,
            y + 4.0,
            t
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#,
        left + plot_w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !c.smoothed.is_empty() {
            let points: Vec<String> = c
                .smoothed
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(x, v)| format!("{:.2},{:.2}", sx(x as f64), sy(*v)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(curves: &[Curve], y_label: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(curves, y_label)).map_err(|e| Error::io(path, e))
}
