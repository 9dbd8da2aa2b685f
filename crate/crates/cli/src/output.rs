//! Files written for a record: canonical JSON, a ladder CSV and an SVG plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::error::CliError;
use crate::record::{Output, ResultRecord};

pub const CSV_HEADER: [&str; 4] = ["knob", "value", "error", "stderr"];

/// One plotted error curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub knob: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Ladder series of a record, in output order.
pub fn ladder_series(record: &ResultRecord) -> Vec<Series> {
    let mut out = Vec::new();
    for o in &record.outputs {
        match o {
            Output::Convergence(c) => out.push(Series {
                label: format!("{} {}", c.statement_id, c.field_id),
                knob: c.knob.name().to_string(),
                points: c
                    .ladder
                    .iter()
                    .zip(&c.errors)
                    .map(|(&k, e)| (k, e.value, e.stderr))
                    .collect(),
            }),
            Output::Density(d) => {
                for knob in [sobolev_wlab::Knob::J, sobolev_wlab::Knob::Epsilon] {
                    out.push(Series {
                        label: format!("density {} search", knob.name()),
                        knob: knob.name().to_string(),
                        points: d
                            .steps
                            .iter()
                            .filter(|s| s.knob == knob)
                            .map(|s| (s.value, s.error, s.stderr))
                            .collect(),
                    });
                }
            }
            _ => {}
        }
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn write_csv(series: &[Series], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let wrap = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for s in series {
        for (k, e, se) in &s.points {
            w.write_record([s.knob.clone(), format!("{k:?}"), format!("{e:?}"), format!("{se:?}")])
                .map_err(wrap)?;
        }
    }
    w.flush().map_err(io_err(path))
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 60.0);
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Self-contained log-log plot with one polyline per series. Points with a
/// non-positive coordinate cannot be placed and are left out.
pub fn render_svg(series: &[Series], title: &str) -> String {
    let placed: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(k, e, _)| *k > 0.0 && *e > 0.0 && k.is_finite() && e.is_finite())
                .map(|(k, e, _)| (k.log10(), e.log10()))
                .collect()
        })
        .collect();
    let (x0, x1) = span(placed.iter().flatten().map(|p| p.0));
    let (y0, y1) = span(placed.iter().flatten().map(|p| p.1));
    let (ml, mr, mt, mb) = MARGIN;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (W - ml - mr);
    let py = |y: f64| H - mb - (y - y0) / (y1 - y0) * (H - mt - mb);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - ml - mr,
        H - mt - mb
    );
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = px(d as f64);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, H - mb + 16.0);
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = py(d as f64);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">1e{d}</text>"#, ml - 6.0);
    }
    let knob = series.first().map_or("knob", |s| s.knob.as_str());
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(knob));
    for (i, (ser, pts)) in series.iter().zip(&placed).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            ml + 8.0,
            mt + 14.0 * (i as f64 + 1.0),
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the requested formats as `<out>/<stem>.<ext>` and returns the
/// paths. CSV and SVG are skipped for records without ladders.
pub fn write_outputs(record: &ResultRecord, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let dir = &record.config.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let series = ladder_series(record);
    let mut written = Vec::new();
    for f in &record.config.formats {
        match f {
            Format::Json => {
                let path = dir.join(format!("{stem}.json"));
                fs::write(&path, record.to_canonical_json()).map_err(io_err(&path))?;
                written.push(path);
            }
            Format::Csv if !series.is_empty() => {
                let path = dir.join(format!("{stem}.csv"));
                write_csv(&series, &path)?;
                written.push(path);
            }
            Format::Svg if !series.is_empty() => {
                let path = dir.join(format!("{stem}.svg"));
                fs::write(&path, render_svg(&series, &record.command)).map_err(io_err(&path))?;
                written.push(path);
            }
            _ => {}
        }
    }
    Ok(written)
}
