//! CSV/JSON/SVG emission and the recomputation of verdicts from CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::lemma::{lemma_verdicts, LemmaReport, LemmaRow, LemmaVerdict};
use super::pathology::PathologyReport;
use super::sequence::SequenceReport;
use super::{relative_increase, ExperimentReport, Row};
use crate::error::{Error, Result};
use crate::psi::{classify_condition, Classification};

pub const LEMMA_CSV: &str = "lemma_le.csv";
pub const SEQUENCE_CSV: &str = "sequence.csv";
pub const PATHOLOGY_CSV: &str = "pathology.csv";
pub const VERDICTS_JSON: &str = "verdicts.json";
pub const TRENDS_SVG: &str = "trends.svg";

const ROW_HEADER: [&str; 5] = ["tier", "J", "y", "quantity", "value"];
const LEMMA_HEADER: [&str; 3] = ["m", "n", "partial_sum"];

const SCOPE_NOTE: &str =
    "Finite probe sets and finite depths: divergence means strict growth across the \
recorded depths beyond the configured threshold, never infinity; null sets of y are not addressed.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathologyVerdicts {
    /// Relative increase of the 2-D norm over the last depth step is below
    /// the saturation threshold.
    pub norm_saturates: bool,
    pub norm_relative_increase: Option<f64>,
    /// Every partial-map seminorm strictly increases across the last three
    /// grid depths.
    pub partial_seminorms_increase: bool,
    pub probes_increasing: usize,
    pub probes_total: usize,
    /// The exact diagnostic at the partial-map probes is divergent.
    pub diagnostic_divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlVerdicts {
    pub classification: Classification,
    pub mixed_norm_cauchy: bool,
    /// The forced bound `S_J^{L/p}` grows less than the plateau threshold
    /// between the first and last exact depths.
    pub forced_bound_plateau: bool,
    pub forced_bound_relative_increase: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub condition_classification: Classification,
    /// Divergence is only predicted when the condition is violated.
    pub divergence_expected: bool,
    pub lemma_le: Vec<LemmaVerdict>,
    pub mixed_norm_cauchy: bool,
    pub mixed_norm_relative_change: Option<f64>,
    pub diagnostic_divergent: bool,
    /// Minimum over probes of the exact diagnostic, per exact depth.
    pub min_diagnostic: Vec<(u64, f64)>,
    pub pathology: PathologyVerdicts,
    pub control: ControlVerdicts,
    pub scope_note: String,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn select<'a>(
    rows: &'a [Row],
    tier: &'a str,
    quantity: &'a str,
) -> impl Iterator<Item = &'a Row> + 'a {
    rows.iter()
        .filter(move |r| r.tier == tier && r.quantity == quantity)
}

fn scalar(rows: &[Row], tier: &str, quantity: &str, depth: u64) -> Option<f64> {
    select(rows, tier, quantity)
        .find(|r| r.depth == depth && r.y.is_none())
        .map(|r| r.value)
}

/// Per probe, its values in depth order; probes keyed by their bit pattern.
fn by_probe(rows: &[Row], tier: &str, quantity: &str, depths: &[u64]) -> BTreeMap<u64, Vec<f64>> {
    let mut out: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for r in select(rows, tier, quantity).filter(|r| depths.contains(&r.depth)) {
        if let Some(y) = r.y {
            out.entry(y.to_bits()).or_default().push((r.depth, r.value));
        }
    }
    out.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|e| e.0);
            (k, v.into_iter().map(|e| e.1).collect())
        })
        .collect()
}

fn last_three(depths: &[u64]) -> &[u64] {
    &depths[depths.len().saturating_sub(3)..]
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Strict growth for every probe over the last three depths and a minimum
/// above `threshold` at the deepest one.
fn divergent(rows: &[Row], tier: &str, depths: &[u64], threshold: f64) -> bool {
    let window = last_three(depths);
    let probes = by_probe(rows, tier, "sup_diagnostic", window);
    if probes.is_empty() {
        return false;
    }
    let all_grow = probes
        .values()
        .all(|v| v.len() == window.len() && strictly_increasing(v));
    let min_last = probes
        .values()
        .filter_map(|v| v.last().copied())
        .fold(f64::INFINITY, f64::min);
    all_grow && min_last > threshold
}

fn min_per_depth(rows: &[Row], tier: &str, quantity: &str, depths: &[u64]) -> Vec<(u64, f64)> {
    depths
        .iter()
        .filter_map(|&d| {
            let m = select(rows, tier, quantity)
                .filter(|r| r.depth == d && r.y.is_some())
                .map(|r| r.value)
                .fold(f64::INFINITY, f64::min);
            m.is_finite().then_some((d, m))
        })
        .collect()
}

fn step_change(rows: &[Row], tier: &str, quantity: &str, depths: &[u64]) -> Option<f64> {
    if depths.len() < 2 {
        return None;
    }
    let prev = scalar(rows, tier, quantity, depths[depths.len() - 2])?;
    let last = scalar(rows, tier, quantity, depths[depths.len() - 1])?;
    finite(relative_increase(prev, last))
}

impl Verdicts {
    /// Verdicts as pure functions of the recorded rows and the configuration.
    pub fn from_rows(
        config: &ExperimentConfig,
        lemma: &[LemmaRow],
        sequence: &[Row],
        pathology: &[Row],
    ) -> Self {
        let th = &config.thresholds;
        let kappa = config.params.kappa();
        let classification = classify_condition(&config.psi, kappa);

        let mixed_change = step_change(sequence, "exact", "mixed_norm", &config.j_diag);
        let control_change = step_change(sequence, "control", "mixed_norm", &config.j_diag);
        let forced_increase = (|| {
            let first = scalar(sequence, "control", "forced_bound", *config.j_diag.first()?)?;
            let last = scalar(sequence, "control", "forced_bound", *config.j_diag.last()?)?;
            finite(relative_increase(first, last))
        })();

        let norm_increase = step_change(pathology, "grid", "besov_norm_2d", &config.j_list);
        let window = last_three(&config.j_list);
        let partial = by_probe(pathology, "grid", "partial_seminorm", window);
        let probes_increasing = partial
            .values()
            .filter(|v| v.len() == window.len() && window.len() >= 2 && strictly_increasing(v))
            .count();

        Verdicts {
            condition_classification: classification,
            divergence_expected: classification == Classification::Violated,
            lemma_le: lemma_verdicts(&config.lemma, lemma),
            mixed_norm_cauchy: mixed_change.is_some_and(|c| c.abs() < th.cauchy),
            mixed_norm_relative_change: mixed_change,
            diagnostic_divergent: divergent(sequence, "exact", &config.j_diag, th.divergence),
            min_diagnostic: min_per_depth(sequence, "exact", "sup_diagnostic", &config.j_diag),
            pathology: PathologyVerdicts {
                norm_saturates: norm_increase.is_some_and(|c| c < th.saturation),
                norm_relative_increase: norm_increase,
                partial_seminorms_increase: !partial.is_empty()
                    && probes_increasing == partial.len(),
                probes_increasing,
                probes_total: partial.len(),
                diagnostic_divergent: divergent(pathology, "exact", &config.j_diag, th.divergence),
            },
            control: ControlVerdicts {
                classification: classify_condition(&config.control_psi, kappa),
                mixed_norm_cauchy: control_change.is_some_and(|c| c.abs() < th.cauchy),
                forced_bound_plateau: forced_increase.is_some_and(|c| c < th.plateau),
                forced_bound_relative_increase: forced_increase,
            },
            scope_note: SCOPE_NOTE.into(),
        }
    }
}

fn output_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Output {
        path: path.to_owned(),
        source,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Output {
                path: path.to_owned(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(output_error(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|source| Error::Input {
        path: path.to_owned(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Writes `lemma_le.csv` alone; returns its path.
pub fn emit_lemma_table(report: &LemmaReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(output_error(dir))?;
    let path = dir.join(LEMMA_CSV);
    write_csv(&path, &LEMMA_HEADER, &report.rows)?;
    Ok(path)
}

/// Writes the three CSV tables, `verdicts.json` and, when enabled,
/// `trends.svg` into `dir`; returns the written paths.
pub fn emit_report(report: &ExperimentReport, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(output_error(dir))?;
    let mut written = vec![emit_lemma_table(&report.lemma, dir)?];
    for (name, rows) in [
        (SEQUENCE_CSV, &report.sequence.rows),
        (PATHOLOGY_CSV, &report.pathology.rows),
    ] {
        let path = dir.join(name);
        write_csv(&path, &ROW_HEADER, rows)?;
        written.push(path);
    }
    let path = dir.join(VERDICTS_JSON);
    let json = serde_json::to_string_pretty(&report.verdicts)?;
    fs::write(&path, json + "\n").map_err(output_error(&path))?;
    written.push(path);
    if svg {
        let path = dir.join(TRENDS_SVG);
        fs::write(&path, trends_svg(report)).map_err(output_error(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Rebuilds a report from the CSV tables in `dir`; its verdicts are derived
/// from those tables alone.
pub fn load_report(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    let lemma: Vec<LemmaRow> = read_csv(&dir.join(LEMMA_CSV))?;
    let sequence: Vec<Row> = read_csv(&dir.join(SEQUENCE_CSV))?;
    let pathology: Vec<Row> = read_csv(&dir.join(PATHOLOGY_CSV))?;
    let verdicts = Verdicts::from_rows(config, &lemma, &sequence, &pathology);
    let kappa = config.params.kappa();
    Ok(ExperimentReport {
        lemma: LemmaReport {
            verdicts: verdicts.lemma_le.clone(),
            rows: lemma,
        },
        sequence: SequenceReport {
            rows: sequence,
            classification: classify_condition(&config.psi, kappa),
            control_classification: classify_condition(&config.control_psi, kappa),
        },
        pathology: PathologyReport { rows: pathology },
        verdicts,
    })
}

pub fn recompute_verdicts(config: &ExperimentConfig, dir: &Path) -> Result<Verdicts> {
    Ok(load_report(config, dir)?.verdicts)
}

pub fn read_verdicts(dir: &Path) -> Result<Verdicts> {
    let path = dir.join(VERDICTS_JSON);
    let text = fs::read_to_string(&path).map_err(|source| Error::Input { path, source })?;
    Ok(serde_json::from_str(&text)?)
}

struct Series {
    label: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

fn series(report: &ExperimentReport) -> Vec<Series> {
    let seq = &report.sequence.rows;
    let path = &report.pathology.rows;
    let scalars = |rows: &[Row], tier: &str, q: &str| -> Vec<(f64, f64)> {
        select(rows, tier, q)
            .filter(|r| r.y.is_none())
            .map(|r| (r.depth as f64, r.value))
            .collect()
    };
    let minima = |rows: &[Row], tier: &str, q: &str| -> Vec<(f64, f64)> {
        let mut depths: Vec<u64> = select(rows, tier, q).map(|r| r.depth).collect();
        depths.dedup();
        min_per_depth(rows, tier, q, &depths)
            .into_iter()
            .map(|(d, v)| (d as f64, v))
            .collect()
    };
    vec![
        Series {
            label: "min exact diagnostic",
            color: "#d62728",
            points: minima(seq, "exact", "sup_diagnostic"),
        },
        Series {
            label: "forced bound S_J^(L/p)",
            color: "#ff7f0e",
            points: scalars(seq, "exact", "forced_bound"),
        },
        Series {
            label: "control forced bound",
            color: "#2ca02c",
            points: scalars(seq, "control", "forced_bound"),
        },
        Series {
            label: "mixed norm",
            color: "#1f77b4",
            points: scalars(seq, "exact", "mixed_norm"),
        },
        Series {
            label: "2-D norm estimate",
            color: "#9467bd",
            points: scalars(path, "grid", "besov_norm_2d"),
        },
        Series {
            label: "min partial seminorm",
            color: "#8c564b",
            points: minima(path, "grid", "partial_seminorm"),
        },
    ]
}

/// Log-log line chart of depth against each trend.
pub fn trends_svg(report: &ExperimentReport) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const PAD: f64 = 60.0;
    let all: Vec<Series> = series(report)
        .into_iter()
        .map(|s| Series {
            points: s
                .points
                .into_iter()
                .filter(|&(x, y)| x > 0.0 && y > 0.0)
                .collect(),
            ..s
        })
        .collect();
    let pts = all.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = pts.fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), (x, y)| {
            (
                a.min(x.log10()),
                b.max(x.log10()),
                c.min(y.log10()),
                d.max(y.log10()),
            )
        },
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| PAD + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD
    );
    for e in x0 as i32..=x1 as i32 {
        let x = sx(10f64.powi(e));
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{e}</text>"#,
            H - PAD + 16.0
        );
    }
    for e in y0 as i32..=y1 as i32 {
        let y = sy(10f64.powi(e));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y:.1}" text-anchor="end">1e{e}</text>"#,
            PAD - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">depth J (log scale)</text>"#,
        W / 2.0,
        H - 16.0
    );
    for (i, s) in all.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.color,
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{}"/>"#,
                sx(x),
                sy(y),
                s.color
            );
        }
        let ly = PAD + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly:.1}" fill="{}">{}</text>"#,
            W - PAD - 150.0,
            s.color,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}
