//! β-sweep orchestration and per-row diagnostics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seglab_core::monotonicity::{
    acf_j, almgren_curve, estimate_c_const, monotone_verdict, segregation_functional, AcfVariant, AlmgrenVariant,
    BlowupScales,
};
use seglab_core::regularity::{blowup_rescale, holder_seminorm, rescaled_residual, BlowupMeta, RescaledResidual};
use seglab_core::solver::{gaussian_pair, solve_pair_with, SolutionPair, Sources};
use seglab_core::{Field, Point};

use crate::centers::auto_centers;
use crate::config::SweepConfig;
use crate::error::LabResult;
use crate::persist::{ensure_dir, save_field, save_solution, write_json};
use crate::report::emit_all;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEntry {
    pub alpha: f64,
    pub l: f64,
    pub r: f64,
    pub component: usize,
}

/// Everything in a row that is recomputed from the persisted fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub lambda: f64,
    pub mu: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub quartic: f64,
    pub coupling_energy: f64,
    pub total_energy: f64,
    /// `β ∫ u² v²`.
    pub segregation: f64,
    pub residual: f64,
    pub iterations: usize,
    pub holder: Vec<HolderEntry>,
    pub lipschitz: f64,
    /// Pair distance and `M_β = L² r^(2α+2)` at the first exponent.
    pub r_beta: f64,
    pub m_beta: f64,
    pub beta_m_beta: f64,
    pub centers: Vec<Point>,
    pub acf_monotone: Option<bool>,
    pub almgren_monotone: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub beta: f64,
    pub status: RowStatus,
    pub error: Option<String>,
    pub warm_started: bool,
    /// Solution directory relative to the output directory.
    pub dir: String,
    pub metrics: Option<RowMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub index: usize,
    pub beta: f64,
    pub center: Point,
    pub acf_radii: Vec<f64>,
    pub acf_j: Vec<f64>,
    pub almgren_radii: Vec<f64>,
    pub almgren_n: Vec<f64>,
    pub almgren_ntilde: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupRecord {
    pub index: usize,
    pub beta: f64,
    pub dir: String,
    pub meta: BlowupMeta,
    pub residual: RescaledResidual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub alphas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub curves: Vec<CurveRecord>,
    pub blowups: Vec<BlowupRecord>,
    pub warnings: Vec<String>,
    /// Files written, relative to the output directory.
    pub manifest: Vec<String>,
}

impl SweepReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Failed).count()
    }

    /// More than half of the rows failed.
    pub fn is_failure(&self) -> bool {
        2 * self.failed_rows() > self.rows.len()
    }
}

pub fn row_dir(index: usize) -> String {
    format!("rows/row_{index:02}")
}

/// Row diagnostics of a solved pair. Centers are `cfg`'s explicit list or
/// automatic interface points; curve records are returned alongside.
pub fn row_metrics(
    sol: &SolutionPair,
    cfg: &SweepConfig,
    iterations: usize,
    index: usize,
) -> LabResult<(RowMetrics, Vec<CurveRecord>, Vec<String>)> {
    let (u, v, p) = (&sol.u, &sol.v, &sol.params);
    let e = &sol.energy;
    let mut holder = Vec::new();
    for &alpha in &cfg.sweep.alphas {
        let rep = holder_seminorm(u, Some(v), alpha)?;
        holder.push(HolderEntry { alpha, l: rep.l, r: rep.r_beta, component: rep.component });
    }
    let lipschitz = match holder.iter().find(|h| h.alpha == 1.0) {
        Some(h) => h.l,
        None => holder_seminorm(u, Some(v), 1.0)?.l,
    };
    let first = &holder[0];
    let m_beta = first.l * first.l * first.r.powf(2.0 * first.alpha + 2.0);

    let mut warnings = Vec::new();
    let d = &cfg.diagnostics;
    let explicit = cfg.explicit_centers();
    let centers = if !explicit.is_empty() {
        explicit
    } else if d.curves {
        let pick = auto_centers(u, v, d.center_count, d.radii_max)?;
        if let Some(w) = pick.warning {
            warnings.push(format!("beta = {}: {w}", p.beta));
        }
        pick.centers
    } else {
        Vec::new()
    };
    let mut curves = Vec::new();
    let (mut acf_ok, mut almgren_ok) = (None, None);
    if d.curves {
        for &c in &centers {
            let reach = u.grid().distance_to_boundary(&c);
            let radii: Vec<f64> = cfg.radii().into_iter().filter(|&r| r < reach).collect();
            if radii.len() < 3 {
                warnings.push(format!("beta = {}: center {:?} too close to the boundary for curves", p.beta, c.0));
                continue;
            }
            let coupling = u.zip_map(v, |a, b| p.beta * a * a * b * b)?;
            let acf = acf_j(u, v, c, &radii, AcfVariant::FWeighted, d.acf_epsilon, Some(&coupling))?;
            let acf_pass = acf.verdict(d.verdict_tol)?.is_monotone;
            let cc = estimate_c_const(u, v, p, Some(c))?.c;
            let scales = BlowupScales { r_beta: 1.0, m_beta: 1.0 };
            let alm = almgren_curve(u, v, c, &radii, AlmgrenVariant::BlowupForm(scales), p, cc)?;
            let alm_pass = monotone_verdict(&alm.ntilde_values, &alm.radii, d.verdict_tol)?.is_monotone;
            acf_ok = Some(acf_ok.unwrap_or(true) && acf_pass);
            almgren_ok = Some(almgren_ok.unwrap_or(true) && alm_pass);
            curves.push(CurveRecord {
                index,
                beta: p.beta,
                center: c,
                acf_radii: acf.radii,
                acf_j: acf.j_values,
                almgren_radii: alm.radii,
                almgren_n: alm.n_values,
                almgren_ntilde: alm.ntilde_values,
            });
        }
    }
    let metrics = RowMetrics {
        lambda: p.lambda,
        mu: p.mu,
        kinetic: e.kinetic,
        potential: e.potential,
        quartic: e.quartic,
        coupling_energy: e.coupling,
        total_energy: e.total,
        segregation: segregation_functional(u, v, p.beta)?,
        residual: sol.residual_l2,
        iterations,
        lipschitz,
        r_beta: first.r,
        m_beta,
        beta_m_beta: p.beta * m_beta,
        holder,
        centers,
        acf_monotone: acf_ok,
        almgren_monotone: almgren_ok,
    };
    Ok((metrics, curves, warnings))
}

struct RowOutcome {
    row: SweepRow,
    curves: Vec<CurveRecord>,
    warnings: Vec<String>,
    solution: Option<SolutionPair>,
}

fn run_row(
    cfg: &SweepConfig,
    out: &Path,
    index: usize,
    beta: f64,
    warm: Option<&SolutionPair>,
) -> LabResult<RowOutcome> {
    let grid = cfg.grid()?;
    let p = cfg.params(beta);
    let (init, record) = match warm {
        Some(prev) => ((prev.u.clone(), prev.v.clone()), None),
        None => {
            let (u, v, rec) = gaussian_pair(&grid, &p, cfg.sweep.seed);
            ((u, v), Some(rec))
        }
    };
    let dir = row_dir(index);
    let mut row = SweepRow {
        index,
        beta,
        status: RowStatus::Failed,
        error: None,
        warm_started: warm.is_some(),
        dir: dir.clone(),
        metrics: None,
    };
    let solved = solve_pair_with(&p, init, cfg.solver.tol, cfg.solver.max_iter, &cfg.solver_config(), &Sources::none());
    let sol = match solved {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return Ok(RowOutcome { row, curves: Vec::new(), warnings: Vec::new(), solution: None });
        }
    };
    save_solution(&out.join(&dir), &sol, record)?;
    let (metrics, curves, warnings) = row_metrics(&sol, cfg, sol.iterations, index)?;
    row.status = RowStatus::Ok;
    row.metrics = Some(metrics);
    Ok(RowOutcome { row, curves, warnings, solution: Some(sol) })
}

/// Runs the schedule of `cfg`, writing fields, blow-up frames and reports
/// under `out`.
///
/// Warm-start mode solves the rows in order, each from the last successful
/// solution; cold-start rows start from the seeded initial pair and run in
/// parallel. A failed solve marks its row and the sweep goes on.
pub fn run_sweep(cfg: &SweepConfig, out: &Path) -> LabResult<SweepReport> {
    cfg.validate()?;
    ensure_dir(out)?;
    let betas = cfg.beta_schedule()?;
    let outcomes: Vec<RowOutcome> = if cfg.sweep.warm_start {
        let mut done = Vec::with_capacity(betas.len());
        let mut last: Option<SolutionPair> = None;
        for (i, &beta) in betas.iter().enumerate() {
            let o = run_row(cfg, out, i, beta, last.as_ref())?;
            if let Some(s) = &o.solution {
                last = Some(s.clone());
            }
            done.push(o);
        }
        done
    } else {
        betas.par_iter().enumerate().map(|(i, &beta)| run_row(cfg, out, i, beta, None)).collect::<LabResult<_>>()?
    };

    let mut report = SweepReport {
        alphas: cfg.sweep.alphas.clone(),
        rows: Vec::new(),
        curves: Vec::new(),
        blowups: Vec::new(),
        warnings: Vec::new(),
        manifest: Vec::new(),
    };
    let mut solutions = Vec::new();
    for o in outcomes {
        if let Some(e) = &o.row.error {
            report.warnings.push(format!("beta = {}: solve failed: {e}", o.row.beta));
        }
        report.curves.extend(o.curves);
        report.warnings.extend(o.warnings);
        solutions.push(o.solution);
        report.rows.push(o.row);
    }
    let top: Vec<usize> = {
        let mut ok: Vec<usize> = (0..report.rows.len()).filter(|&i| solutions[i].is_some()).collect();
        let keep = ok.len().saturating_sub(cfg.sweep.blowup_top);
        ok.drain(..keep);
        ok
    };
    for i in top {
        let sol = solutions[i].as_ref().expect("successful row");
        let rec = blowup_row(sol, cfg, out, i)?;
        report.blowups.push(rec);
    }
    emit_all(&mut report, cfg, out)?;
    Ok(report)
}

pub fn blowup_dir(index: usize) -> String {
    format!("blowup/row_{index:02}")
}

fn blowup_row(sol: &SolutionPair, cfg: &SweepConfig, out: &Path, index: usize) -> LabResult<BlowupRecord> {
    let rep = holder_seminorm(&sol.u, Some(&sol.v), cfg.sweep.alphas[0])?;
    let frame = blowup_rescale(sol, &rep, cfg.sweep.blowup_window)?;
    let residual = rescaled_residual(&frame, sol)?;
    let dir = blowup_dir(index);
    let path: PathBuf = out.join(&dir);
    write_frame(&path, &frame.u_bar, &frame.v_bar, &frame.meta)?;
    Ok(BlowupRecord { index, beta: sol.params.beta, dir, meta: frame.meta, residual })
}

pub fn write_frame(dir: &Path, u_bar: &Field, v_bar: &Field, meta: &BlowupMeta) -> LabResult<()> {
    ensure_dir(dir)?;
    save_field(&dir.join("u_bar.gpsf"), u_bar)?;
    save_field(&dir.join("v_bar.gpsf"), v_bar)?;
    write_json(&dir.join("frame.json"), meta)
}
