//! Report emission: `report.csv`, `report.json` and SVG charts.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `index`, `beta`, `status`, `warm_started` | row identity |
//! | `lambda`, `mu` | realized multipliers |
//! | `kinetic`, `potential`, `quartic`, `coupling_energy`, `total_energy` | energy breakdown |
//! | `segregation` | `β ∫ u² v²` |
//! | `residual`, `iterations` | solver outcome |
//! | `L_<α>`, `r_<α>` | seminorm and pair distance, one pair per tracked exponent |
//! | `lipschitz` | `α = 1` seminorm |
//! | `r_beta`, `m_beta`, `beta_m_beta` | blow-up scales at the first exponent |
//! | `acf_monotone`, `almgren_monotone` | curve verdicts (empty without curves) |
//! | `dir`, `error` | solution directory, failure message |
//!
//! Failed rows leave the metric cells empty. Floats use the shortest
//! representation that parses back to the same value.

use std::fs;
use std::path::Path;

use crate::config::SweepConfig;
use crate::error::{LabError, LabResult};
use crate::persist::{read_json, write_json};
use crate::svg::{log_log_slope, LineChart, Series};
use crate::sweep::{RowMetrics, RowStatus, SweepReport, SweepRow};

pub const CSV_FILE: &str = "report.csv";
pub const JSON_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SVG_FILES: [&str; 3] = ["segregation.svg", "holder.svg", "frequency.svg"];

pub fn csv_header(alphas: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "index",
        "beta",
        "status",
        "warm_started",
        "lambda",
        "mu",
        "kinetic",
        "potential",
        "quartic",
        "coupling_energy",
        "total_energy",
        "segregation",
        "residual",
        "iterations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for a in alphas {
        h.push(format!("L_{a}"));
        h.push(format!("r_{a}"));
    }
    for s in ["lipschitz", "r_beta", "m_beta", "beta_m_beta", "acf_monotone", "almgren_monotone", "dir", "error"] {
        h.push(s.to_string());
    }
    h
}

fn opt_bool(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

/// Metric cells of a row, aligned with the metric part of [`csv_header`]
/// (from `lambda` to `almgren_monotone`).
pub fn metric_cells(m: &RowMetrics) -> Vec<String> {
    let mut c: Vec<String> = [
        m.lambda,
        m.mu,
        m.kinetic,
        m.potential,
        m.quartic,
        m.coupling_energy,
        m.total_energy,
        m.segregation,
        m.residual,
    ]
    .iter()
    .map(|x| x.to_string())
    .collect();
    c.push(m.iterations.to_string());
    for h in &m.holder {
        c.push(h.l.to_string());
        c.push(h.r.to_string());
    }
    for x in [m.lipschitz, m.r_beta, m.m_beta, m.beta_m_beta] {
        c.push(x.to_string());
    }
    c.push(opt_bool(m.acf_monotone));
    c.push(opt_bool(m.almgren_monotone));
    c
}

pub fn csv_cells(row: &SweepRow, alphas: &[f64]) -> Vec<String> {
    let status = match row.status {
        RowStatus::Ok => "ok",
        RowStatus::Failed => "failed",
    };
    let mut c = vec![row.index.to_string(), row.beta.to_string(), status.to_string(), row.warm_started.to_string()];
    match &row.metrics {
        Some(m) => c.extend(metric_cells(m)),
        None => c.extend(std::iter::repeat_n(String::new(), 16 + 2 * alphas.len())),
    }
    c.push(row.dir.clone());
    c.push(row.error.clone().unwrap_or_default());
    c
}

pub fn write_csv(path: &Path, rows: &[SweepRow], alphas: &[f64]) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::parse(path, e))?;
    w.write_record(csv_header(alphas)).map_err(|e| LabError::parse(path, e))?;
    for r in rows {
        w.write_record(csv_cells(r, alphas)).map_err(|e| LabError::parse(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

/// A loaded CSV report: header and raw cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of a cell; `None` when empty or not a number.
    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        self.rows.get(row)?.get(c)?.parse().ok()
    }
}

pub fn read_csv(path: &Path) -> LabResult<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LabError::parse(path, e))?;
    let header = r.headers().map_err(|e| LabError::parse(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| LabError::parse(path, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(CsvTable { header, rows })
}

pub fn load_report(out: &Path) -> LabResult<SweepReport> {
    read_json(&out.join(JSON_FILE))
}

fn write_text(path: &Path, text: &str) -> LabResult<()> {
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

fn ok_rows(report: &SweepReport) -> impl Iterator<Item = (&SweepRow, &RowMetrics)> {
    report.rows.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r, m)))
}

pub fn segregation_chart(report: &SweepReport) -> LineChart {
    let points: Vec<(f64, f64)> = ok_rows(report).map(|(r, m)| (r.beta, m.segregation)).collect();
    let annotation = log_log_slope(&points).map(|s| format!("least-squares slope {s:.3}"));
    LineChart {
        title: "Segregation vs coupling".into(),
        x_label: "beta".into(),
        y_label: "beta * int u^2 v^2".into(),
        log_x: true,
        log_y: true,
        series: vec![Series { name: "segregation".into(), points }],
        annotation,
    }
}

pub fn holder_chart(report: &SweepReport) -> LineChart {
    let mut series: Vec<Series> = report
        .alphas
        .iter()
        .enumerate()
        .map(|(k, a)| Series {
            name: format!("alpha = {a}"),
            points: ok_rows(report).map(|(r, m)| (r.beta, m.holder[k].l)).collect(),
        })
        .collect();
    if !report.alphas.contains(&1.0) {
        series.push(Series {
            name: "Lipschitz".into(),
            points: ok_rows(report).map(|(r, m)| (r.beta, m.lipschitz)).collect(),
        });
    }
    LineChart {
        title: "Hoelder seminorms vs coupling".into(),
        x_label: "beta".into(),
        y_label: "L_beta".into(),
        log_x: true,
        log_y: false,
        series,
        annotation: None,
    }
}

pub fn frequency_chart(report: &SweepReport) -> LineChart {
    let mut seen = Vec::new();
    let mut series = Vec::new();
    for c in &report.curves {
        if seen.contains(&c.index) {
            continue;
        }
        seen.push(c.index);
        series.push(Series {
            name: format!("beta = {}", c.beta),
            points: c.almgren_radii.iter().copied().zip(c.almgren_n.iter().copied()).collect(),
        });
    }
    LineChart {
        title: "Almgren frequency at the first center".into(),
        x_label: "r".into(),
        y_label: "N(r)".into(),
        log_x: false,
        log_y: false,
        series,
        annotation: None,
    }
}

/// Writes the config copy, CSV, JSON and (when enabled) SVG files, and
/// fills the report's manifest.
pub fn emit_all(report: &mut SweepReport, cfg: &SweepConfig, out: &Path) -> LabResult<()> {
    let mut stored = cfg.clone();
    stored.output.dir = ".".into();
    write_text(&out.join(CONFIG_FILE), &stored.to_toml_string())?;
    write_csv(&out.join(CSV_FILE), &report.rows, &report.alphas)?;
    let mut manifest = vec![CONFIG_FILE.to_string(), CSV_FILE.to_string(), JSON_FILE.to_string()];
    if cfg.output.svg {
        let charts = [segregation_chart(report), holder_chart(report), frequency_chart(report)];
        for (name, chart) in SVG_FILES.iter().zip(charts) {
            write_text(&out.join(name), &chart.render())?;
            manifest.push(name.to_string());
        }
    }
    for r in report.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        for f in ["u.gpsf", "v.gpsf", "solution.json"] {
            manifest.push(format!("{}/{f}", r.dir));
        }
    }
    for b in &report.blowups {
        for f in ["u_bar.gpsf", "v_bar.gpsf", "frame.json"] {
            manifest.push(format!("{}/{f}", b.dir));
        }
    }
    manifest.sort();
    report.manifest = manifest;
    write_json(&out.join(JSON_FILE), report)
}

/// Rewrites CSV and SVG files from a persisted `report.json`.
pub fn regenerate(out: &Path, svg: bool) -> LabResult<SweepReport> {
    let report = load_report(out)?;
    write_csv(&out.join(CSV_FILE), &report.rows, &report.alphas)?;
    if svg {
        let charts = [segregation_chart(&report), holder_chart(&report), frequency_chart(&report)];
        for (name, chart) in SVG_FILES.iter().zip(charts) {
            write_text(&out.join(name), &chart.render())?;
        }
    }
    Ok(report)
}
