//! Nonnegative solution pairs of the competing system
//!
//! ```text
//! -Δu + λu = ω₁u³ - βuv² + h
//! -Δv + μv = ω₂v³ - βu²v + k      in Ω,   u = v = 0 on ∂Ω
//! ```
//!
//! computed by a mass-constrained semi-implicit gradient flow, together with
//! the linear Helmholtz solves behind the exponential-decay estimate.

mod cg;
mod flow;
mod helmholtz;
mod init;
mod multi;

pub use cg::{pcg, CgOutcome};
pub use flow::{flow_step, flow_step_with, solve_pair, solve_pair_with, FlowStep};
pub use helmholtz::{solve_helmholtz, verify_exponential_decay, DecayCheck};
pub use init::{gaussian_pair, InitRecord};
pub use multi::{flow_step_k, solve_k, MultiParams, MultiSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::stencil::{dirichlet_form, laplacian};

/// Coefficients of the pair system. When a mass is set, the matching
/// chemical potential is an output of the solve (the realized Lagrange
/// multiplier); otherwise it is an input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mass1: Option<f64>,
    pub mass2: Option<f64>,
}

impl ModelParams {
    /// Defocusing (`ω = -1`) pair with unit masses.
    pub fn defocusing(beta: f64) -> Self {
        ModelParams { beta, omega1: -1.0, omega2: -1.0, lambda: 0.0, mu: 0.0, mass1: Some(1.0), mass2: Some(1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta, self.omega1, self.omega2, self.lambda, self.mu];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        for (mass, omega, name) in [(self.mass1, self.omega1, "1"), (self.mass2, self.omega2, "2")] {
            match mass {
                Some(m) if !(m > 0.0 && m.is_finite()) => {
                    return Err(Error::InvalidArgument(format!("mass{name} must be positive, got {m}")));
                }
                None if omega > 0.0 => {
                    return Err(Error::InvalidArgument(format!(
                        "focusing omega{name} > 0 needs a mass constraint"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The same system with the two components exchanged.
    pub fn swapped(&self) -> Self {
        ModelParams {
            beta: self.beta,
            omega1: self.omega2,
            omega2: self.omega1,
            lambda: self.mu,
            mu: self.lambda,
            mass1: self.mass2,
            mass2: self.mass1,
        }
    }
}

/// Optional source terms `h`, `k` of the perturbed system.
#[derive(Clone, Debug, Default)]
pub struct Sources {
    pub h: Option<Field>,
    pub k: Option<Field>,
}

impl Sources {
    pub fn none() -> Self {
        Sources::default()
    }
}

/// Time-stepping and linear-solver controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial step; `None` means `0.4 h²`.
    pub dt: Option<f64>,
    /// Factor applied to `dt` after each accepted step.
    pub dt_growth: f64,
    pub dt_max: f64,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dt: None, dt_growth: 1.5, dt_max: 1.0, cg_rel_tol: 1e-11, cg_max_iter: 10_000 }
    }
}

impl SolverConfig {
    /// Fixed step, no growth.
    pub fn fixed(dt: f64) -> Self {
        SolverConfig { dt: Some(dt), dt_growth: 1.0, dt_max: dt, ..SolverConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub quartic: f64,
    pub coupling: f64,
    pub total: f64,
}

/// A converged pair with its realized multipliers.
#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub u: Field,
    pub v: Field,
    pub params: ModelParams,
    pub residual_l2: f64,
    pub iterations: usize,
    pub energy: EnergyBreakdown,
    pub dt_final: f64,
    pub h_src: Option<Field>,
    pub k_src: Option<Field>,
}

/// Energy whose critical points solve the unperturbed system:
/// `½∫(|∇u|²+|∇v|²) + ½∫(λu²+μv²) - ¼∫(ω₁u⁴+ω₂v⁴) + ½β∫u²v²`.
pub fn energy(u: &Field, v: &Field, p: &ModelParams) -> Result<EnergyBreakdown> {
    u.check_same_grid(v)?;
    let grid = u.grid();
    let (mut m2u, mut m2v, mut m4u, mut m4v, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        let w = grid.node_weight(i);
        let (a, b) = (u.get(i) * u.get(i), v.get(i) * v.get(i));
        m2u += w * a;
        m2v += w * b;
        m4u += w * a * a;
        m4v += w * b * b;
        cross += w * a * b;
    }
    let kinetic = 0.5 * (dirichlet_form(u) + dirichlet_form(v));
    let potential = 0.5 * (p.lambda * m2u + p.mu * m2v);
    let quartic = -0.25 * (p.omega1 * m4u + p.omega2 * m4v);
    let coupling = 0.5 * p.beta * cross;
    Ok(EnergyBreakdown { kinetic, potential, quartic, coupling, total: kinetic + potential + quartic + coupling })
}

/// Pointwise residual `-Δu + λu - ωu³ + rep·u - src` at interior nodes.
pub(crate) fn component_residual(
    u: &Field,
    repulsion: &[f64],
    omega: f64,
    source: Option<&Field>,
    lambda: f64,
) -> Field {
    let grid = *u.grid();
    let lap = laplacian(u);
    let values = (0..grid.len())
        .map(|i| {
            if grid.is_boundary(i) {
                return 0.0;
            }
            let x = u.get(i);
            let s = source.map_or(0.0, |f| f.get(i));
            -lap.get(i) + lambda * x - omega * x * x * x + repulsion[i] * x - s
        })
        .collect();
    Field::from_raw(grid, values)
}

/// Rayleigh-quotient multiplier `-Σu(-Δu - ωu³ + rep·u - src) / Σu²`: the
/// value of λ minimising the discrete residual. With this sign convention a
/// positive decoupled state has λ equal to minus the Dirichlet eigenvalue.
pub(crate) fn realized_multiplier(u: &Field, repulsion: &[f64], omega: f64, source: Option<&Field>) -> f64 {
    let grid = u.grid();
    let lap = laplacian(u);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..grid.len() {
        if grid.is_boundary(i) {
            continue;
        }
        let x = u.get(i);
        let s = source.map_or(0.0, |f| f.get(i));
        num += x * (-lap.get(i) - omega * x * x * x + repulsion[i] * x - s);
        den += x * x;
    }
    if den > 0.0 {
        -num / den
    } else {
        0.0
    }
}

pub(crate) fn interior_l2(f: &Field) -> f64 {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let sum: f64 = (0..grid.len()).filter(|&i| !grid.is_boundary(i)).map(|i| f.get(i) * f.get(i)).sum();
    (sum * vol).sqrt()
}

pub(crate) fn repulsion(beta: f64, other: &Field) -> Vec<f64> {
    other.values().iter().map(|&x| beta * x * x).collect()
}

/// Residual fields of the pair system for the given multipliers.
pub fn residual_fields(u: &Field, v: &Field, p: &ModelParams, sources: &Sources) -> Result<(Field, Field)> {
    u.check_same_grid(v)?;
    let ru = component_residual(u, &repulsion(p.beta, v), p.omega1, sources.h.as_ref(), p.lambda);
    let rv = component_residual(v, &repulsion(p.beta, u), p.omega2, sources.k.as_ref(), p.mu);
    Ok((ru, rv))
}

/// `(‖r_u‖² + ‖r_v‖²)^(1/2)` over interior nodes.
pub fn residual_l2(u: &Field, v: &Field, p: &ModelParams, sources: &Sources) -> Result<f64> {
    let (ru, rv) = residual_fields(u, v, p, sources)?;
    Ok(interior_l2(&ru).hypot(interior_l2(&rv)))
}
