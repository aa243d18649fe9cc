//! Plot-data emission: turn sweep or epsilon CSVs into per-series data
//! files plus a small self-contained SVG with dots and whiskers, mirroring
//! the dots-and-whiskers convention of the posterior-collapse figures.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::aggregate::aggregate;
use super::config::PlotKind;
use super::epsilon::read_epsilon;
use super::sweep::read_summaries;
use crate::error::Result;

/// What `emit_plotdata` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotReport {
    pub series_files: Vec<PathBuf>,
    pub svg_file: PathBuf,
    pub warnings: Vec<String>,
}

/// One plotted series: a label and `(n, center, lower, upper)` whisker rows.
#[derive(Debug, Clone, PartialEq)]
struct Series {
    label: String,
    points: Vec<(usize, f64, f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#66a182", "#edae49", "#8d5a97", "#00798c", "#a44a3f", "#5d576b",
];

/// Read `input`, build the series for `kind`, and write one data file per
/// series plus `<kind>.svg` into `out_dir`. Empty input is not an error:
/// the SVG keeps its axes, no series files appear, and a warning is
/// reported.
pub fn emit_plotdata(input: &Path, kind: PlotKind, out_dir: &Path) -> Result<PlotReport> {
    std::fs::create_dir_all(out_dir)?;
    let series = match kind {
        PlotKind::Collapse | PlotKind::Robustness => sweep_series(input)?,
        PlotKind::Epsilon => epsilon_series(input)?,
    };

    let mut warnings = Vec::new();
    if series.is_empty() {
        warnings.push(format!(
            "no usable rows in {}; emitting an empty figure",
            input.display()
        ));
    }

    let mut series_files = Vec::new();
    for s in &series {
        let path = out_dir.join(format!("series_{}_{}.csv", kind.tag(), sanitize(&s.label)));
        let mut file = std::fs::File::create(&path)?;
        writeln!(file, "# gvi-plotdata {} v1", kind.tag())?;
        writeln!(file, "n,center,lower,upper")?;
        for (n, c, lo, hi) in &s.points {
            writeln!(file, "{n},{c},{lo},{hi}")?;
        }
        series_files.push(path);
    }

    let svg_file = out_dir.join(format!("{}.svg", kind.tag()));
    std::fs::write(&svg_file, render_svg(&series, kind))?;

    Ok(PlotReport {
        series_files,
        svg_file,
        warnings,
    })
}

/// Aggregate a sweep CSV into one series per `(loss, divergence)`, with
/// whiskers at `m̄ ± s̄`.
fn sweep_series(input: &Path) -> Result<Vec<Series>> {
    let rows = read_summaries(input)?;
    let agg = aggregate(&rows, false);
    let mut series: Vec<Series> = Vec::new();
    for row in agg {
        let loss_label = match row.gamma {
            Some(g) => format!("{}_{g}", row.loss),
            None => row.loss.clone(),
        };
        let div_label = match row.alpha {
            Some(a) => format!("{}_{a}", row.divergence),
            None => row.divergence.clone(),
        };
        let label = format!("{loss_label}__{div_label}");
        let point = (row.n, row.m_bar, row.m_bar - row.s_bar, row.m_bar + row.s_bar);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    for s in series.iter_mut() {
        s.points.sort_by_key(|p| p.0);
    }
    series.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(series)
}

/// Quartile whiskers of the epsilon diagnostic, one series.
fn epsilon_series(input: &Path) -> Result<Vec<Series>> {
    let rows = read_epsilon(input)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for r in &rows {
        by_n.entry(r.n).or_default().push(r.epsilon);
    }
    let points = by_n
        .into_iter()
        .map(|(n, mut vals)| {
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = |f: f64| vals[((vals.len() - 1) as f64 * f).round() as usize];
            (n, q(0.5), q(0.25), q(0.75))
        })
        .collect();
    Ok(vec![Series {
        label: "epsilon".to_string(),
        points,
    }])
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' })
        .collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 48.0;

fn render_svg(series: &[Series], kind: PlotKind) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // data ranges; harmless defaults keep the empty figure well-formed
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| (p.0 as f64).log10()))
        .collect();
    let (x_min, x_max) = padded_range(&xs, 1.0, 4.0, 0.05);
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().flat_map(|p| [p.2, p.3]))
        .collect();
    let (y_min, y_max) = padded_range(&ys, -1.0, 1.0, 0.08);

    let x_of = |logn: f64| MARGIN_L + (logn - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let y_of = |v: f64| HEIGHT - MARGIN_B - (v - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    // axes
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );

    // x ticks at decades
    let mut decade = x_min.ceil() as i64;
    while (decade as f64) <= x_max {
        let x = x_of(decade as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">1e{decade}</text>"#,
            y0 + 20.0
        );
        decade += 1;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">n</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 10.0
    );

    // y ticks
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{v:.3}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let y_label = match kind {
        PlotKind::Epsilon => "epsilon_n",
        _ => "recentered posterior mean +/- sd",
    };
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.2})">{y_label}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );

    // series: whisker plus dot, horizontally staggered so they stay legible
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let offset = (idx as f64 - (series.len() as f64 - 1.0) / 2.0) * 7.0;
        for (n, center, lo, hi) in &s.points {
            let x = x_of((*n as f64).log10()) + offset;
            let _ = writeln!(
                svg,
                r#"<line class="whisker" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
                y_of(*lo),
                y_of(*hi)
            );
            let _ = writeln!(
                svg,
                r#"<circle class="dot" cx="{x:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                y_of(*center)
            );
        }
        let ly = MARGIN_T + 16.0 * idx as f64 + 10.0;
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{color}"/>"#,
            x1 + 14.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            x1 + 24.0,
            ly + 4.0,
            s.label
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: &[f64], fallback_lo: f64, fallback_hi: f64, pad: f64) -> (f64, f64) {
    if values.is_empty() {
        return (fallback_lo, fallback_hi);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo).abs() < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let span = hi - lo;
    (lo - pad * span, hi + pad * span)
}
