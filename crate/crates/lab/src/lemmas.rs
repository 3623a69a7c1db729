//! Lemma checks with closed-form references: the `γ` inequality on
//! complementary circle arcs and the exponential decay of Helmholtz
//! solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use seglab_core::monotonicity::gamma_inequality_check;
use seglab_core::solver::{solve_helmholtz, verify_exponential_decay};
use seglab_core::{BallQuadrature, Field, Grid, Point};

use crate::error::LabResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    /// Fraction of the circle taken by the first arc.
    pub split: f64,
    /// `γ(λ₁) + γ(λ₂) - 2`.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSweep {
    pub rows: Vec<GammaRow>,
    pub min_excess: f64,
    /// Nonnegative up to `-1e-12`, and zero only at the even split.
    pub pass: bool,
}

/// Split fractions of the arc sweep: `0.01` and `k/20` for `k = 1..=19`.
pub fn gamma_splits() -> Vec<f64> {
    std::iter::once(0.01).chain((1..20).map(|k| k as f64 / 20.0)).collect()
}

/// Complementary arcs of the unit circle; an arc of length `ℓ` has first
/// Dirichlet eigenvalue `(π/ℓ)²`.
pub fn gamma_sweep() -> LabResult<GammaSweep> {
    let mut rows = Vec::new();
    for t in gamma_splits() {
        let (l1, l2) = (2.0 * PI * t, 2.0 * PI * (1.0 - t));
        let excess = gamma_inequality_check((PI / l1).powi(2), (PI / l2).powi(2), 2)?;
        rows.push(GammaRow { split: t, excess });
    }
    let min_excess = rows.iter().map(|r| r.excess).fold(f64::INFINITY, f64::min);
    let pass = rows.iter().all(|r| {
        let even = (r.split - 0.5).abs() < 1e-12;
        r.excess >= -1e-12 && (even || r.excess > 1e-12)
    });
    Ok(GammaSweep { rows, min_excess, pass })
}

/// `I₀(x)` from its power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub m: f64,
    pub h: f64,
    pub lhs: f64,
    pub bound: f64,
    pub bound_pass: bool,
    pub center_value: f64,
    /// `A / I₀(√M R)`, the radial solution at the center.
    pub center_exact: f64,
    pub center_rel_err: f64,
}

/// Grid spacing used for mass `M`: fine enough that `√M h ≤ 0.1`.
pub fn decay_spacing(m: f64) -> f64 {
    0.005f64.min(0.1 / m.sqrt())
}

/// Solves `-Δw + M w = 0` in `B_R(0)` with `w = A` on the sphere and checks
/// the decay estimate with parameters `(ε, θ)` and relative `slack`.
pub fn decay_check(m: f64, a: f64, r: f64, eps: f64, theta: f64, slack: f64) -> LabResult<DecayRow> {
    let h = decay_spacing(m);
    let half = 1.1 * r;
    let cells = 2 * (half / h).ceil() as usize;
    let grid = Grid::square(-(cells as f64) * h / 2.0, cells as f64 * h / 2.0, cells)?;
    let center = Point::new2(0.0, 0.0);
    let q = BallQuadrature::with_defaults(&grid, center, r)?;
    let rhs = Field::zeros(grid);
    let sol = solve_helmholtz(m, &rhs, a, &q)?;
    let check = verify_exponential_decay(&sol, center, m, a, r, eps, theta, &rhs, slack)?;
    let center_value = sol.get(grid.nearest_node(&center));
    let center_exact = a / bessel_i0(m.sqrt() * r);
    Ok(DecayRow {
        m,
        h,
        lhs: check.lhs,
        bound: check.bound,
        bound_pass: check.pass,
        center_value,
        center_exact,
        center_rel_err: (center_value - center_exact).abs() / center_exact.abs(),
    })
}
