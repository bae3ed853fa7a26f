//! Output files: `records.csv`, `meta.json` and `<name>.svg`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::{CurveSpec, FigureSpec, OutputFormat, PointMetrics, SweepConfig, SweepRecord};
use crate::model::{HBAR, K_B};

/// Bumped whenever the CSV column contract changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("no records to write")]
    Empty,
    #[error("no output format selected")]
    NoFormat,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EmitError + '_ {
    move |source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the header row and one row per record. Failed points keep their
/// leading columns and leave every metric empty.
pub fn write_csv<W: io::Write>(records: &[SweepRecord], out: W) -> Result<(), EmitError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SweepRecord::columns())?;
    for r in records {
        let mut row = vec![
            r.drive.to_string(),
            r.temperature.to_string(),
            r.variant.to_string(),
            r.status.as_str().to_string(),
            r.gaussianity_warning.to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend(m.values().iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat_n(
                String::new(),
                PointMetrics::COLUMNS.len(),
            )),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct Constants {
    hbar: f64,
    k_b: f64,
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: u32,
    artifact_version: &'static str,
    constants: Constants,
    columns: Vec<&'static str>,
    points: usize,
    failed_points: usize,
    config: &'a SweepConfig,
}

fn default_figure(config: &SweepConfig) -> FigureSpec {
    let mut curves = Vec::new();
    for &v in &config.variants {
        for &t in &config.temperatures {
            curves.push(CurveSpec {
                label: format!("{v}, T = {t} K"),
                column: "rel_g1_global".into(),
                temperature: t,
                variant: v,
            });
        }
    }
    FigureSpec {
        title: "g1 bound from the QFI".into(),
        y_label: "relative error bound on g1".into(),
        curves,
    }
}

/// Writes every requested format under `config.out_dir` and returns the
/// paths written.
pub fn emit(records: &[SweepRecord], config: &SweepConfig) -> Result<Vec<PathBuf>, EmitError> {
    if records.is_empty() {
        return Err(EmitError::Empty);
    }
    if config.formats.is_empty() {
        return Err(EmitError::NoFormat);
    }
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for format in &config.formats {
        let path = match format {
            OutputFormat::Csv => {
                let path = dir.join("records.csv");
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                write_csv(records, io::BufWriter::new(file))?;
                path
            }
            OutputFormat::Json => {
                let path = dir.join("meta.json");
                let meta = Meta {
                    schema_version: SCHEMA_VERSION,
                    artifact_version: env!("CARGO_PKG_VERSION"),
                    constants: Constants {
                        hbar: HBAR,
                        k_b: K_B,
                    },
                    columns: SweepRecord::columns(),
                    points: records.len(),
                    failed_points: records.iter().filter(|r| !r.is_ok()).count(),
                    config,
                };
                let mut text = serde_json::to_string_pretty(&meta)?;
                text.push('\n');
                fs::write(&path, text).map_err(io_err(&path))?;
                path
            }
            OutputFormat::Svg => {
                let path = dir.join(format!("{}.svg", config.name));
                let fig = config
                    .figure
                    .clone()
                    .unwrap_or_else(|| default_figure(config));
                fs::write(&path, render_svg(&fig, records)).map_err(io_err(&path))?;
                path
            }
        };
        written.push(path);
    }
    Ok(written)
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
];
const DASHES: [&str; 3] = ["", "6,4", "2,3"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn curve_points(c: &CurveSpec, records: &[SweepRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.temperature == c.temperature && r.variant == c.variant)
        .filter_map(|r| Some((r.get("log10_photon_number")?, r.get(&c.column)?)))
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
        .map(|(x, y)| (x, y.log10()))
        .collect()
}

/// Static log-log line plot: `log₁₀|α|²` horizontally, `log₁₀` of each
/// curve's column vertically.
pub fn render_svg(fig: &FigureSpec, records: &[SweepRecord]) -> String {
    let data: Vec<Vec<(f64, f64)>> = fig
        .curves
        .iter()
        .map(|c| curve_points(c, records))
        .collect();
    let all = data.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let mut k = x0;
    while k <= x1 + 1e-9 {
        let x = sx(k);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">10^{k}</text>"#,
            TOP + ph + 19.0
        );
        k += 1.0;
    }
    let mut k = y0;
    let y_step = ((y1 - y0) / 10.0).ceil().max(1.0);
    while k <= y1 + 1e-9 {
        let y = sy(k);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">10^{k}</text>"#,
            LEFT - 8.0,
            y + 4.0
        );
        k += y_step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">|alpha|^2</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );
    for (i, (c, pts)) in fig.curves.iter().zip(&data).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[(i / COLORS.len()) % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        if !pts.is_empty() {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
