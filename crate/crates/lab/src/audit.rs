//! Recomputes report rows from persisted fields and compares them with the
//! CSV cells.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;
use crate::error::{LabError, LabResult};
use crate::persist::load_solution;
use crate::report::{csv_header, metric_cells, read_csv, CSV_FILE, CONFIG_FILE};
use crate::sweep::{row_metrics, RowMetrics};

/// Recomputes the metrics of the row stored in `out/<dir>`.
pub fn recompute_row(out: &Path, dir: &str, cfg: &SweepConfig, index: usize) -> LabResult<RowMetrics> {
    let (sol, meta) = load_solution(&out.join(dir))?;
    Ok(row_metrics(&sol, cfg, meta.iterations, index)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowAudit {
    pub index: usize,
    pub max_rel_deviation: f64,
    pub worst_column: String,
    /// Text columns (verdicts) that differ.
    pub mismatched: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<RowAudit>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Audits every successful row of the sweep in `out` against its CSV.
/// The sweep's own `config.toml` copy supplies the diagnostics settings.
pub fn audit(out: &Path, tolerance: f64) -> LabResult<AuditReport> {
    let cfg = SweepConfig::load(&out.join(CONFIG_FILE))?;
    let table = read_csv(&out.join(CSV_FILE))?;
    let path = out.join(CSV_FILE);
    if table.header != csv_header(&cfg.sweep.alphas) {
        return Err(LabError::parse(&path, "CSV header does not match the config's exponents"));
    }
    let first_metric = table.column("lambda").expect("fixed column");
    let mut rows = Vec::new();
    for (k, cells) in table.rows.iter().enumerate() {
        if cells[table.column("status").expect("fixed column")] != "ok" {
            continue;
        }
        let index: usize = cells[0].parse().map_err(|e| LabError::parse(&path, e))?;
        let dir = &cells[table.column("dir").expect("fixed column")];
        let fresh = metric_cells(&recompute_row(out, dir, &cfg, index)?);
        let mut audit = RowAudit { index, max_rel_deviation: 0.0, worst_column: String::new(), mismatched: Vec::new() };
        for (j, new) in fresh.iter().enumerate() {
            let col = first_metric + j;
            let old = &table.rows[k][col];
            match (old.parse::<f64>(), new.parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    let dev = if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
                    if dev > audit.max_rel_deviation || audit.worst_column.is_empty() {
                        audit.max_rel_deviation = dev;
                        audit.worst_column = table.header[col].clone();
                    }
                }
                _ if old == new => {}
                _ => audit.mismatched.push(table.header[col].clone()),
            }
        }
        rows.push(audit);
    }
    let pass = rows.iter().all(|r| r.max_rel_deviation <= tolerance && r.mismatched.is_empty());
    Ok(AuditReport { rows, tolerance, pass })
}
