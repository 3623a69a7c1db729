//! Monotonicity diagnostics: the ACF product `J(r)`, its weighted variant,
//! the characteristic function `γ`, and Almgren's `(E, H, N)`.
//!
//! Energies inside balls are evaluated with [`BallQuadrature`] samples of
//! the multilinear interpolant (value and cellwise gradient); boundary
//! masses use [`sphere_integral_with`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Point};
use crate::interp::{interpolate, interpolate_gradient};
use crate::quadrature::{
    ball_integral_with, default_n_angular, f_weight, m_weight, sphere_integral_with, BallQuadrature, Kernel,
};
use crate::solver::ModelParams;

/// `γ(x) = √(((N-2)/2)² + x) - (N-2)/2`.
pub fn gamma_fn(x: f64, n: usize) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma needs x >= 0, got {x}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("gamma needs N >= 2, got {n}")));
    }
    let a = (n as f64 - 2.0) / 2.0;
    Ok((a * a + x).sqrt() - a)
}

/// `γ(λ₁) + γ(λ₂) - 2` for first Dirichlet eigenvalues of two disjoint
/// subsets of the unit sphere; nonnegative for admissible inputs.
pub fn gamma_inequality_check(e1: f64, e2: f64, n: usize) -> Result<f64> {
    Ok(gamma_fn(e1, n)? + gamma_fn(e2, n)? - 2.0)
}

/// Outcome of a discrete monotonicity test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneVerdict {
    pub is_monotone: bool,
    /// Largest drop `f(r_i) - f(r_{i+1})` between consecutive radii (0 when
    /// the curve never decreases).
    pub worst_violation: f64,
    /// Outer radius of the worst drop.
    pub worst_radius: f64,
    pub tolerance_used: f64,
}

/// Non-decreasing test with tolerance `tol_rel · max|f|`.
pub fn monotone_verdict(values: &[f64], radii: &[f64], tol_rel: f64) -> Result<MonotoneVerdict> {
    if values.len() != radii.len() {
        return Err(Error::InvalidArgument("values and radii differ in length".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance_used = tol_rel * scale;
    let mut worst_violation = 0.0;
    let mut worst_radius = radii[0];
    for i in 1..values.len() {
        let drop = values[i - 1] - values[i];
        if drop > worst_violation {
            worst_violation = drop;
            worst_radius = radii[i];
        }
    }
    Ok(MonotoneVerdict { is_monotone: worst_violation <= tolerance_used, worst_violation, worst_radius, tolerance_used })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcfVariant {
    Classic,
    FWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub center: Point,
    pub radii: Vec<f64>,
    pub j_values: Vec<f64>,
    pub variant: AcfVariant,
    pub epsilon_exponent: f64,
    /// Whether the classic hypotheses (`uv ≡ 0`, `u(x0) = v(x0) = 0`) hold;
    /// only checked for the classic variant.
    pub hypotheses_hold: bool,
    pub notes: Vec<String>,
}

impl AcfCurve {
    pub fn verdict(&self, tol_rel: f64) -> Result<MonotoneVerdict> {
        monotone_verdict(&self.j_values, &self.radii, tol_rel)
    }

    /// Smallest sampled radius from which the curve is monotone onward.
    pub fn monotone_from(&self, tol_rel: f64) -> Option<f64> {
        let scale = self.j_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = tol_rel * scale;
        let n = self.j_values.len();
        let mut start = n.checked_sub(1)?;
        while start > 0 && self.j_values[start - 1] - self.j_values[start] <= tol {
            start -= 1;
        }
        Some(self.radii[start])
    }
}

const HYPOTHESIS_TOL: f64 = 1e-10;

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) || radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn grad_sq(f: &Field, p: &Point) -> Result<f64> {
    let g = interpolate_gradient(f, p)?;
    Ok(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
}

/// ACF functional at each radius.
///
/// `Classic`: `(r⁻² ∫_{B_r} |∇u|²/|x-x0|^(N-2)) · (same for v)`.
/// `FWeighted`: `r^-(4-ε) · I_u · I_v` with
/// `I_u = ∫_{B_r} f(|x-x0|)(|∇u|² + c) + m(|x-x0|) u²`, where `c` is `u²v²`
/// or the supplied `coupling` field (e.g. `βM u²v²` for blow-up pairs).
/// Violated hypotheses are reported on the curve, not as errors.
pub fn acf_j(
    u: &Field,
    v: &Field,
    x0: Point,
    radii: &[f64],
    variant: AcfVariant,
    eps: f64,
    coupling: Option<&Field>,
) -> Result<AcfCurve> {
    u.check_same_grid(v)?;
    if let Some(c) = coupling {
        c.check_same_grid(u)?;
    }
    check_radii(radii)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {eps}")));
    }
    let grid = *u.grid();
    let mut notes = Vec::new();
    if variant == AcfVariant::Classic {
        let scale = u.max_abs().max(v.max_abs()).max(f64::MIN_POSITIVE);
        let overlap = u.values().iter().zip(v.values()).fold(0.0f64, |m, (a, b)| m.max((a * b).abs()));
        if overlap > HYPOTHESIS_TOL * scale * scale {
            notes.push(format!("u v is not identically zero (max |uv| = {overlap:.3e})"));
        }
        let (u0, v0) = (interpolate(u, &x0)?, interpolate(v, &x0)?);
        if u0.abs() > HYPOTHESIS_TOL * scale || v0.abs() > HYPOTHESIS_TOL * scale {
            notes.push(format!("center is not a common zero (u = {u0:.3e}, v = {v0:.3e})"));
        }
    }
    let dim = grid.dim();
    let mut j_values = Vec::with_capacity(radii.len());
    for &r in radii {
        let q = BallQuadrature::with_defaults(&grid, x0, r)?;
        let j = match variant {
            AcfVariant::Classic => {
                let a = ball_integral_with(&q, Kernel::Acf, |p| grad_sq(u, p))?;
                let b = ball_integral_with(&q, Kernel::Acf, |p| grad_sq(v, p))?;
                (a / (r * r)) * (b / (r * r))
            }
            AcfVariant::FWeighted => {
                let q = q.with_break(1.0)?;
                let cross = |p: &Point| -> Result<f64> {
                    match coupling {
                        Some(c) => interpolate(c, p),
                        None => {
                            let (a, b) = (interpolate(u, p)?, interpolate(v, p)?);
                            Ok(a * a * b * b)
                        }
                    }
                };
                let weighted = |f: &Field| {
                    q.sum(|p, rho| {
                        let val = interpolate(f, p)?;
                        Ok(f_weight(rho, dim) * (grad_sq(f, p)? + cross(p)?) + m_weight(rho, dim) * val * val)
                    })
                };
                let (a, b) = (weighted(u)?, weighted(v)?);
                a * b / r.powf(4.0 - eps)
            }
        };
        j_values.push(j);
    }
    Ok(AcfCurve {
        center: x0,
        radii: radii.to_vec(),
        j_values,
        variant,
        epsilon_exponent: eps,
        hypotheses_hold: notes.is_empty(),
        notes,
    })
}

/// Scales of a blow-up frame entering the rescaled energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupScales {
    pub r_beta: f64,
    pub m_beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlmgrenVariant {
    /// `N = E/H` for rescaled pairs, with
    /// `E = r^(2-N) ∫ |∇u|²+|∇v|² + r_β²(λu²+μv²) - M_β(ω₁u⁴+ω₂v⁴) + 2βM_β u²v²`.
    BlowupForm(BlowupScales),
    /// `N = E/H + 1` for limiting profiles, with
    /// `E = r^(2-N) ∫ |∇u|²+|∇v|² + λu²+μv² - ω₁u⁴ - ω₂v⁴`.
    LimitForm,
}

/// `(E(r), H(r))` about `x0`, with `H = r^(1-N) ∫_{∂B_r} u² + v²`.
pub fn almgren_eh(
    u: &Field,
    v: &Field,
    x0: Point,
    r: f64,
    variant: AlmgrenVariant,
    p: &ModelParams,
) -> Result<(f64, f64)> {
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let dim = grid.dim() as i32;
    let q = BallQuadrature::with_defaults(&grid, x0, r)?;
    let integral = q.sum(|x, _| {
        let (a, b) = (interpolate(u, x)?, interpolate(v, x)?);
        let (a2, b2) = (a * a, b * b);
        let kinetic = grad_sq(u, x)? + grad_sq(v, x)?;
        Ok(match variant {
            AlmgrenVariant::BlowupForm(s) => {
                kinetic + s.r_beta * s.r_beta * (p.lambda * a2 + p.mu * b2)
                    - s.m_beta * (p.omega1 * a2 * a2 + p.omega2 * b2 * b2)
                    + 2.0 * p.beta * s.m_beta * a2 * b2
            }
            AlmgrenVariant::LimitForm => kinetic + p.lambda * a2 + p.mu * b2 - p.omega1 * a2 * a2 - p.omega2 * b2 * b2,
        })
    })?;
    let e = integral * r.powi(2 - dim);
    let boundary = sphere_integral_with(&grid, x0, r, default_n_angular(r, grid.h()), |x| {
        let (a, b) = (interpolate(u, x)?, interpolate(v, x)?);
        Ok(a * a + b * b)
    })?;
    let h = boundary * r.powi(1 - dim);
    Ok((e, h))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmgrenCurve {
    pub center: Point,
    pub radii: Vec<f64>,
    pub e_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub n_values: Vec<f64>,
    /// `e^(C r²) N(r)`.
    pub ntilde_values: Vec<f64>,
    pub c_const: f64,
    pub variant: AlmgrenVariant,
    /// Radii removed because `H` fell below the floor.
    pub dropped_radii: Vec<f64>,
    pub dim: usize,
}

/// Relative floor below which `H(r)` is treated as vanishing.
pub const H_FLOOR_REL: f64 = 1e-14;

/// `(E, H, N, Ñ)` over increasing radii. Radii with `H < 1e-14 max H` are
/// dropped and listed in the result.
pub fn almgren_curve(
    u: &Field,
    v: &Field,
    x0: Point,
    radii: &[f64],
    variant: AlmgrenVariant,
    p: &ModelParams,
    c_const: f64,
) -> Result<AlmgrenCurve> {
    check_radii(radii)?;
    let eh = radii.iter().map(|&r| almgren_eh(u, v, x0, r, variant, p)).collect::<Result<Vec<_>>>()?;
    let h_max = eh.iter().fold(0.0f64, |m, &(_, h)| m.max(h));
    if !(h_max > 0.0) {
        return Err(Error::EmptyCurve);
    }
    let offset = match variant {
        AlmgrenVariant::BlowupForm(_) => 0.0,
        AlmgrenVariant::LimitForm => 1.0,
    };
    let mut curve = AlmgrenCurve {
        center: x0,
        radii: Vec::new(),
        e_values: Vec::new(),
        h_values: Vec::new(),
        n_values: Vec::new(),
        ntilde_values: Vec::new(),
        c_const,
        variant,
        dropped_radii: Vec::new(),
        dim: u.grid().dim(),
    };
    for (&r, &(e, h)) in radii.iter().zip(&eh) {
        if h < H_FLOOR_REL * h_max {
            curve.dropped_radii.push(r);
            continue;
        }
        let n = e / h + offset;
        curve.radii.push(r);
        curve.e_values.push(e);
        curve.h_values.push(h);
        curve.n_values.push(n);
        curve.ntilde_values.push((c_const * r * r).exp() * n);
    }
    Ok(curve)
}

/// Comparison of `d/dr log H` with the frequency: `2N/r` in the blow-up form,
/// `2(N-1)/r` in the limit form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Interior radii where the derivative was taken.
    pub radii: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `|lhs - rhs| / max(|rhs|, 2/r)` per radius.
    pub deviations: Vec<f64>,
    pub max_rel_deviation: f64,
    pub worst_radius: f64,
}

impl IdentityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_deviation <= tol
    }
}

/// Checks the `log H` derivative identity with second-order central
/// differences on the (possibly non-uniform) sampled radii, at every
/// interior radius.
pub fn log_h_identity_check(curve: &AlmgrenCurve) -> Result<IdentityReport> {
    let r = &curve.radii;
    if r.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 radii, got {}", r.len())));
    }
    let logh: Vec<f64> = curve.h_values.iter().map(|h| h.ln()).collect();
    let mut report = IdentityReport {
        radii: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        deviations: Vec::new(),
        max_rel_deviation: 0.0,
        worst_radius: r[1],
    };
    // Differences are taken in log r, which is exact on power laws H ∝ r^k.
    let s: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    for i in 1..r.len() - 1 {
        let (hm, hp) = (s[i] - s[i - 1], s[i + 1] - s[i]);
        let dlog = (-hp / (hm * (hm + hp))) * logh[i - 1]
            + ((hp - hm) / (hm * hp)) * logh[i]
            + (hm / (hp * (hm + hp))) * logh[i + 1];
        let d = dlog / r[i];
        let freq = match curve.variant {
            AlmgrenVariant::BlowupForm(_) => curve.n_values[i],
            AlmgrenVariant::LimitForm => curve.n_values[i] - 1.0,
        };
        let rhs = 2.0 * freq / r[i];
        let dev = (d - rhs).abs() / rhs.abs().max(2.0 / r[i]);
        if dev > report.max_rel_deviation || report.radii.is_empty() {
            report.max_rel_deviation = dev;
            report.worst_radius = r[i];
        }
        report.radii.push(r[i]);
        report.lhs.push(d);
        report.rhs.push(rhs);
        report.deviations.push(dev);
    }
    Ok(report)
}

/// The constant `C` of the perturbed frequency and the radius `r̄` below
/// which `e^(Cr²) N` is expected to be monotone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CConst {
    pub c: f64,
    pub r_bar: f64,
}

/// `C = max(|λ|,|μ|) + max(|ω₁|,|ω₂|) max(‖u‖∞², ‖v‖∞²)`, and
/// `r̄ = min(√((N-1)/(2C)), dist(center, ∂Ω))` (the distance term is the
/// whole half-extent when no center is given).
pub fn estimate_c_const(u: &Field, v: &Field, p: &ModelParams, center: Option<Point>) -> Result<CConst> {
    u.check_same_grid(v)?;
    let grid = u.grid();
    let sup = u.max_abs().max(v.max_abs());
    let c = p.lambda.abs().max(p.mu.abs()) + p.omega1.abs().max(p.omega2.abs()) * sup * sup;
    let domain = match center {
        Some(x) => grid.distance_to_boundary(&x),
        None => (0..grid.dim()).map(|a| grid.extent(a) / 2.0).fold(f64::INFINITY, f64::min),
    };
    let poincare = if c > 0.0 { ((grid.dim() as f64 - 1.0) / (2.0 * c)).sqrt() } else { f64::INFINITY };
    Ok(CConst { c, r_bar: poincare.min(domain) })
}

/// `β ∫_Ω u² v²` with trapezoid node weights.
pub fn segregation_functional(u: &Field, v: &Field, beta: f64) -> Result<f64> {
    u.check_same_grid(v)?;
    let grid = u.grid();
    let s: f64 = (0..grid.len())
        .map(|i| {
            let (a, b) = (u.get(i), v.get(i));
            grid.node_weight(i) * a * a * b * b
        })
        .sum();
    Ok(beta * s)
}
