//! Sweep configuration: flat TOML sections of scalars and scalar arrays.
//!
//! ```toml
//! [grid]
//! cells = 128          # per axis; nodes = cells + 1
//! lo = 0.0
//! hi = 1.0
//! dim = 2
//!
//! [model]
//! omega1 = -1.0
//! omega2 = -1.0
//! mass1 = 1.0
//! mass2 = 1.0
//! constrained = true   # false: lambda and mu are inputs, masses ignored
//!
//! [sweep]
//! betas = [10.0, 100.0, 1000.0, 10000.0]   # empty: geometric schedule
//! alphas = [0.5, 1.0]
//! warm_start = true
//! seed = 7
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seglab_core::solver::{ModelParams, SolverConfig};
use seglab_core::{Grid, Point};

use crate::error::{LabError, LabResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub cells: usize,
    pub lo: f64,
    pub hi: f64,
    pub dim: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: 128, lo: 0.0, hi: 1.0, dim: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub constrained: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { omega1: -1.0, omega2: -1.0, lambda: 0.0, mu: 0.0, mass1: 1.0, mass2: 1.0, constrained: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit schedule; when empty, `beta_count` geometric points from
    /// `beta_min` to `beta_max`.
    pub betas: Vec<f64>,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_count: usize,
    pub alphas: Vec<f64>,
    pub warm_start: bool,
    pub seed: u64,
    /// Blow-up frames are taken at this many of the largest β.
    pub blowup_top: usize,
    pub blowup_window: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            betas: Vec::new(),
            beta_min: 10.0,
            beta_max: 1e4,
            beta_count: 8,
            alphas: vec![0.5, 1.0],
            warm_start: true,
            seed: 7,
            blowup_top: 3,
            blowup_window: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Flat list `x0, y0, x1, y1, ...` (triples in 3D); empty means
    /// automatic free-boundary centers.
    pub centers: Vec<f64>,
    pub center_count: usize,
    pub radii_min: f64,
    pub radii_max: f64,
    pub radii_count: usize,
    pub acf_epsilon: f64,
    /// Relative tolerance of the monotone verdicts.
    pub verdict_tol: f64,
    pub curves: bool,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            centers: Vec::new(),
            center_count: 1,
            radii_min: 0.03,
            radii_max: 0.15,
            radii_count: 8,
            acf_epsilon: 0.5,
            verdict_tol: 1e-2,
            curves: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub dt_growth: f64,
    pub dt_max: f64,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            tol: 1e-6,
            max_iter: 20_000,
            dt_growth: d.dt_growth,
            dt_max: d.dt_max,
            cg_rel_tol: d.cg_rel_tol,
            cg_max_iter: d.cg_max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("sweep_out"), svg: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub sweep: SweepSection,
    pub diagnostics: DiagnosticsSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> LabResult<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            LabError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> LabResult<()> {
        let g = &self.grid;
        if !(g.dim == 2 || g.dim == 3) {
            return Err(config_err(format!("grid.dim must be 2 or 3, got {}", g.dim)));
        }
        if g.cells < 2 {
            return Err(config_err(format!("grid.cells must be at least 2, got {}", g.cells)));
        }
        if !(g.hi > g.lo && g.lo.is_finite() && g.hi.is_finite()) {
            return Err(config_err("grid.lo must be below grid.hi"));
        }
        self.params(0.0).validate().map_err(|e| config_err(e.to_string()))?;
        let betas = self.beta_schedule()?;
        if betas.is_empty() {
            return Err(config_err("the beta schedule is empty"));
        }
        if betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(config_err("beta values must be finite and nonnegative"));
        }
        if betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("the beta schedule must be strictly increasing"));
        }
        let s = &self.sweep;
        if s.alphas.is_empty() || s.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(config_err("sweep.alphas must be nonempty and lie in (0, 1]"));
        }
        if !(s.blowup_window > 0.0) {
            return Err(config_err("sweep.blowup_window must be positive"));
        }
        let d = &self.diagnostics;
        if d.centers.len() % g.dim != 0 {
            return Err(config_err(format!("diagnostics.centers needs a multiple of {} coordinates", g.dim)));
        }
        if d.curves && !(0.0 < d.radii_min && d.radii_min < d.radii_max && d.radii_count >= 3) {
            return Err(config_err("need 0 < radii_min < radii_max and radii_count >= 3"));
        }
        if !(d.verdict_tol >= 0.0) || !(d.acf_epsilon >= 0.0) {
            return Err(config_err("diagnostics tolerances must be nonnegative"));
        }
        let v = &self.solver;
        if !(v.tol > 0.0) || v.max_iter == 0 || !(v.dt_growth >= 1.0) || !(v.dt_max > 0.0) || !(v.cg_rel_tol > 0.0) {
            return Err(config_err("solver settings out of range"));
        }
        Ok(())
    }

    pub fn grid(&self) -> LabResult<Grid> {
        let g = &self.grid;
        let built = match g.dim {
            2 => Grid::square(g.lo, g.hi, g.cells),
            _ => Grid::cube(g.lo, g.hi, g.cells),
        };
        built.map_err(|e| config_err(e.to_string()))
    }

    /// The model template with the given coupling.
    pub fn params(&self, beta: f64) -> ModelParams {
        let m = &self.model;
        let (mass1, mass2) = if m.constrained { (Some(m.mass1), Some(m.mass2)) } else { (None, None) };
        ModelParams { beta, omega1: m.omega1, omega2: m.omega2, lambda: m.lambda, mu: m.mu, mass1, mass2 }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt: None,
            dt_growth: s.dt_growth,
            dt_max: s.dt_max,
            cg_rel_tol: s.cg_rel_tol,
            cg_max_iter: s.cg_max_iter,
        }
    }

    pub fn beta_schedule(&self) -> LabResult<Vec<f64>> {
        let s = &self.sweep;
        if !s.betas.is_empty() {
            return Ok(s.betas.clone());
        }
        if !(s.beta_min > 0.0 && s.beta_max > s.beta_min) || s.beta_count < 2 {
            return Err(config_err("geometric schedule needs 0 < beta_min < beta_max and beta_count >= 2"));
        }
        let n = s.beta_count - 1;
        let ratio = s.beta_max / s.beta_min;
        Ok((0..=n)
            .map(|i| match i {
                0 => s.beta_min,
                i if i == n => s.beta_max,
                i => s.beta_min * ratio.powf(i as f64 / n as f64),
            })
            .collect())
    }

    pub fn radii(&self) -> Vec<f64> {
        let d = &self.diagnostics;
        radii_range(d.radii_min, d.radii_max, d.radii_count)
    }

    pub fn explicit_centers(&self) -> Vec<Point> {
        self.diagnostics
            .centers
            .chunks(self.grid.dim)
            .map(|c| if c.len() == 2 { Point::new2(c[0], c[1]) } else { Point::new3(c[0], c[1], c[2]) })
            .collect()
    }
}

/// `n` equally spaced radii from `lo` to `hi`.
pub fn radii_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = SweepConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, SweepConfig::default());
        let betas = cfg.beta_schedule().unwrap();
        assert_eq!(betas.len(), 8);
        assert_eq!((betas[0], betas[7]), (10.0, 1e4));
        assert!((betas[1] / betas[0] - 10f64.powf(3.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = SweepConfig::from_toml_str(
            "[grid]\ncells = 32\n[sweep]\nbetas = [1.0, 5.0]\nalphas = [0.25]\nwarm_start = false\n\
             [diagnostics]\ncenters = [0.5, 0.5, 0.25, 0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.cells, 32);
        assert_eq!(cfg.beta_schedule().unwrap(), vec![1.0, 5.0]);
        assert_eq!(cfg.explicit_centers(), vec![Point::new2(0.5, 0.5), Point::new2(0.25, 0.5)]);
        assert!(!cfg.sweep.warm_start);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = SweepConfig::default();
        cfg.sweep.betas = vec![3.0, 30.0];
        let back = SweepConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid_settings() {
        for bad in [
            "[sweep]\nbetas = [10.0, 5.0]",
            "[sweep]\nbetas = [-1.0]",
            "[sweep]\nalphas = [1.5]",
            "[grid]\ndim = 4",
            "[grid]\nunknown = 1",
            "[diagnostics]\ncenters = [0.5]",
            "[model]\nomega1 = 1.0\nconstrained = false",
            "not toml =",
        ] {
            assert!(matches!(SweepConfig::from_toml_str(bad), Err(LabError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn decoupled_single_beta_is_allowed() {
        let cfg = SweepConfig::from_toml_str("[sweep]\nbetas = [0.0]").unwrap();
        assert_eq!(cfg.beta_schedule().unwrap(), vec![0.0]);
    }
}
