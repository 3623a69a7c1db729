use super::cg::pcg;
use super::{
    component_residual, energy, interior_l2, realized_multiplier, repulsion, ModelParams, SolutionPair,
    SolverConfig, Sources,
};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::stencil::apply_laplacian;

/// Result of one gradient-flow step.
#[derive(Clone, Debug)]
pub struct FlowStep {
    pub u: Field,
    pub v: Field,
    /// Multipliers after the step: realized when the mass is constrained,
    /// the input values otherwise.
    pub lambda: f64,
    pub mu: f64,
    pub cg_iterations: usize,
}

/// One semi-implicit step for a single component.
///
/// With `a = rep - ωu²` the net potential of the explicit terms, the shift
/// `σ = max(a, 0)` is moved to the implicit side:
/// `(1/dt + σ + λ_fixed - Δ) u* = u/dt + (σ - a) u + src`.
/// The operator is an SPD M-matrix and the right-hand side is nonnegative
/// for nonnegative sources, so `u* ≥ 0` up to the CG tolerance.
pub(crate) fn advance_component(
    u: &Field,
    repulsion: &[f64],
    omega: f64,
    source: Option<&Field>,
    lambda_fixed: f64,
    mass: Option<f64>,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<(Field, usize)> {
    let grid = *u.grid();
    let n = grid.len();
    let inv_dt = 1.0 / dt;
    let diag_lap = 2.0 * grid.dim() as f64 / (grid.h() * grid.h());
    let boundary = grid.boundary_mask();
    let mut coef = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        if boundary[i] {
            continue;
        }
        let x = u.get(i);
        let a = repulsion[i] - omega * x * x;
        let sigma = a.max(0.0);
        coef[i] = inv_dt + sigma + lambda_fixed;
        rhs[i] = x * inv_dt + (sigma * x - a * x) + source.map_or(0.0, |f| f.get(i));
    }
    let diag: Vec<f64> =
        (0..n).map(|i| if boundary[i] { 1.0 } else { coef[i] + diag_lap }).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        apply_laplacian(&grid, x, y);
        for i in 0..n {
            y[i] = if boundary[i] { x[i] } else { coef[i] * x[i] - y[i] };
        }
    };
    let mut x = u.values().to_vec();
    let out = pcg(apply, &diag, &rhs, &mut x, cfg.cg_rel_tol, cfg.cg_max_iter)?;
    for (i, v) in x.iter_mut().enumerate() {
        if *v < 0.0 || boundary[i] {
            *v = 0.0;
        }
    }
    if let Some(target) = mass {
        let current: f64 = x.iter().enumerate().map(|(i, v)| v * v * grid.node_weight(i)).sum();
        if current > 0.0 {
            let s = (target / current).sqrt();
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok((Field::from_raw(grid, x), out.iterations))
}

/// One step of the pair flow with default solver controls and no sources.
pub fn flow_step(u: &Field, v: &Field, p: &ModelParams, dt: f64) -> Result<FlowStep> {
    flow_step_with(u, v, p, dt, &SolverConfig::default(), &Sources::none())
}

/// One step of the pair flow. Both components are advanced from the same
/// old iterate, so the step commutes with exchanging the components.
pub fn flow_step_with(
    u: &Field,
    v: &Field,
    p: &ModelParams,
    dt: f64,
    cfg: &SolverConfig,
    sources: &Sources,
) -> Result<FlowStep> {
    u.check_same_grid(v)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let lam_fixed = if p.mass1.is_some() { 0.0 } else { p.lambda };
    let mu_fixed = if p.mass2.is_some() { 0.0 } else { p.mu };
    let (un, iu) =
        advance_component(u, &repulsion(p.beta, v), p.omega1, sources.h.as_ref(), lam_fixed, p.mass1, dt, cfg)?;
    let (vn, iv) =
        advance_component(v, &repulsion(p.beta, u), p.omega2, sources.k.as_ref(), mu_fixed, p.mass2, dt, cfg)?;
    let lambda = match p.mass1 {
        Some(_) => realized_multiplier(&un, &repulsion(p.beta, &vn), p.omega1, sources.h.as_ref()),
        None => p.lambda,
    };
    let mu = match p.mass2 {
        Some(_) => realized_multiplier(&vn, &repulsion(p.beta, &un), p.omega2, sources.k.as_ref()),
        None => p.mu,
    };
    Ok(FlowStep { u: un, v: vn, lambda, mu, cg_iterations: iu + iv })
}

/// Functional decreased by the flow: the energy without the (constant under
/// the mass constraint) multiplier terms, minus the source work.
fn flow_energy(u: &Field, v: &Field, p: &ModelParams, sources: &Sources) -> Result<f64> {
    let e = energy(u, v, p)?;
    let grid = u.grid();
    let mut fixed = 0.0;
    let mut work = 0.0;
    for i in 0..grid.len() {
        let w = grid.node_weight(i);
        if p.mass1.is_none() {
            fixed += 0.5 * w * p.lambda * u.get(i) * u.get(i);
        }
        if p.mass2.is_none() {
            fixed += 0.5 * w * p.mu * v.get(i) * v.get(i);
        }
        if let Some(h) = &sources.h {
            work += w * h.get(i) * u.get(i);
        }
        if let Some(k) = &sources.k {
            work += w * k.get(i) * v.get(i);
        }
    }
    Ok(e.kinetic + e.quartic + e.coupling - work + fixed)
}

/// Iterates the flow to a residual of at most `tol`, using default solver
/// controls and no sources.
pub fn solve_pair(p: &ModelParams, init: (Field, Field), tol: f64, max_iter: usize) -> Result<SolutionPair> {
    solve_pair_with(p, init, tol, max_iter, &SolverConfig::default(), &Sources::none())
}

/// Iterates [`flow_step_with`] until the recomputed discrete residual of the
/// system (with the realized multipliers) drops to `tol`.
///
/// A step that raises the flow energy is rejected and retried with half the
/// step; accepted steps grow `dt` by `cfg.dt_growth` up to `cfg.dt_max`.
pub fn solve_pair_with(
    p: &ModelParams,
    init: (Field, Field),
    tol: f64,
    max_iter: usize,
    cfg: &SolverConfig,
    sources: &Sources,
) -> Result<SolutionPair> {
    p.validate()?;
    let (mut u, mut v) = init;
    u.check_same_grid(&v)?;
    for f in [&sources.h, &sources.k].into_iter().flatten() {
        f.check_same_grid(&u)?;
    }
    if u.min() < 0.0 || v.min() < 0.0 {
        return Err(Error::InvalidArgument("initial data must be nonnegative".into()));
    }
    if u.max_abs() == 0.0 && v.max_abs() == 0.0 {
        return Err(Error::InvalidArgument("initial data must be nonzero".into()));
    }
    u.enforce_dirichlet();
    v.enforce_dirichlet();
    let grid = *u.grid();
    let h = grid.h();
    let dt0 = cfg.dt.unwrap_or(0.4 * h * h);
    let dt_floor = dt0 * 1e-6;
    let mut dt = dt0;
    let mut params = p.clone();

    if let Some(m) = p.mass1 {
        u = rescale_to_mass(&u, m);
    }
    if let Some(m) = p.mass2 {
        v = rescale_to_mass(&v, m);
    }
    params.lambda = if p.mass1.is_some() {
        realized_multiplier(&u, &repulsion(p.beta, &v), p.omega1, sources.h.as_ref())
    } else {
        p.lambda
    };
    params.mu = if p.mass2.is_some() {
        realized_multiplier(&v, &repulsion(p.beta, &u), p.omega2, sources.k.as_ref())
    } else {
        p.mu
    };

    let mut e = flow_energy(&u, &v, &params, sources)?;
    let mut res = pair_residual(&u, &v, &params, sources);
    let mut iterations = 0;
    while res > tol {
        if iterations >= max_iter {
            return Err(Error::MaxIterations { max_iter, residual: res });
        }
        iterations += 1;
        let step = flow_step_with(&u, &v, &params, dt, cfg, sources);
        let step = match step {
            Ok(s) => s,
            Err(Error::NonFinite { .. }) => return Err(Error::NanDetected { step: iterations }),
            Err(e) => return Err(e),
        };
        let e_new = flow_energy(&step.u, &step.v, &params, sources)?;
        if !e_new.is_finite() || !step.lambda.is_finite() || !step.mu.is_finite() {
            return Err(Error::NanDetected { step: iterations });
        }
        if e_new > e + 1e-12 * e.abs().max(1.0) && dt > dt_floor {
            dt *= 0.5;
            continue;
        }
        u = step.u;
        v = step.v;
        params.lambda = step.lambda;
        params.mu = step.mu;
        e = e_new;
        dt = (dt * cfg.dt_growth).min(cfg.dt_max.max(dt0));
        res = pair_residual(&u, &v, &params, sources);
    }
    let energy = energy(&u, &v, &params)?;
    // Residual recomputed from the returned state.
    let residual_l2 = pair_residual(&u, &v, &params, sources);
    Ok(SolutionPair {
        u,
        v,
        params,
        residual_l2,
        iterations,
        energy,
        dt_final: dt,
        h_src: sources.h.clone(),
        k_src: sources.k.clone(),
    })
}

pub(super) fn rescale_to_mass(f: &Field, target: f64) -> Field {
    let grid = f.grid();
    let current: f64 = f.values().iter().enumerate().map(|(i, v)| v * v * grid.node_weight(i)).sum();
    if current > 0.0 {
        f.scale((target / current).sqrt())
    } else {
        f.clone()
    }
}

fn pair_residual(u: &Field, v: &Field, p: &ModelParams, sources: &Sources) -> f64 {
    let ru = component_residual(u, &repulsion(p.beta, v), p.omega1, sources.h.as_ref(), p.lambda);
    let rv = component_residual(v, &repulsion(p.beta, u), p.omega2, sources.k.as_ref(), p.mu);
    interior_l2(&ru).hypot(interior_l2(&rv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::solver::{gaussian_pair, residual_l2};
    use std::f64::consts::PI;

    fn mass(f: &Field) -> f64 {
        f.l2_norm().powi(2)
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = Grid::unit_square(16).unwrap();
        let z = Field::zeros(g);
        let p = ModelParams { mass1: None, mass2: None, ..ModelParams::defocusing(10.0) };
        let s = flow_step(&z, &z, &p, 1e-3).unwrap();
        assert!(s.u.values().iter().chain(s.v.values()).all(|&x| x == 0.0));
    }

    #[test]
    fn principal_eigenvalue_of_unit_square() {
        let g = Grid::unit_square(128).unwrap();
        let p = ModelParams { beta: 0.0, omega1: 0.0, omega2: 0.0, ..ModelParams::defocusing(0.0) };
        let (u0, v0, _) = gaussian_pair(&g, &p, 7);
        let sol = solve_pair(&p, (u0, v0), 1e-6, 5000).unwrap();
        // -Δu + λu = 0 with u > 0: λ is minus the first eigenvalue 2π²
        let target = -2.0 * PI * PI;
        assert!((sol.params.lambda - target).abs() / target.abs() < 0.01, "λ = {}", sol.params.lambda);
        assert!((sol.params.mu - target).abs() / target.abs() < 0.01);
        assert!(sol.residual_l2 <= 1e-6);
        // the principal eigenfunction is positive in the interior
        let mid = g.index(64, 64, 0);
        let ratio = sol.u.get(mid) / sol.u.max();
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn step_commutes_with_component_swap() {
        let g = Grid::unit_square(32).unwrap();
        let p = ModelParams { beta: 50.0, omega1: -1.0, omega2: -2.0, lambda: 0.0, mu: 0.0, mass1: Some(1.0), mass2: Some(2.0) };
        let (u, v, _) = gaussian_pair(&g, &p, 3);
        let a = flow_step(&u, &v, &p, 1e-3).unwrap();
        let b = flow_step(&v, &u, &p.swapped(), 1e-3).unwrap();
        assert_eq!(a.u, b.v);
        assert_eq!(a.v, b.u);
        assert_eq!(a.lambda.to_bits(), b.mu.to_bits());
    }

    #[test]
    fn mass_nonnegativity_and_energy_descent() {
        let g = Grid::unit_square(48).unwrap();
        let p = ModelParams::defocusing(200.0);
        let (mut u, mut v, _) = gaussian_pair(&g, &p, 11);
        let dt = 0.4 * g.h() * g.h();
        let mut prev = None;
        for _ in 0..40 {
            let s = flow_step(&u, &v, &p, dt).unwrap();
            u = s.u;
            v = s.v;
            assert!(u.min() >= 0.0 && v.min() >= 0.0);
            assert!((mass(&u) - 1.0).abs() < 1e-12);
            assert!((mass(&v) - 1.0).abs() < 1e-12);
            let e = energy(&u, &v, &ModelParams { lambda: 0.0, mu: 0.0, ..p.clone() }).unwrap().total;
            if let Some(prev) = prev {
                assert!(e <= prev + 1e-10, "energy rose {prev} -> {e}");
            }
            prev = Some(e);
        }
    }

    #[test]
    fn returned_residual_is_recomputed() {
        let g = Grid::unit_square(32).unwrap();
        let p = ModelParams::defocusing(100.0);
        let (u, v, _) = gaussian_pair(&g, &p, 1);
        let sol = solve_pair(&p, (u, v), 1e-7, 5000).unwrap();
        let again = residual_l2(&sol.u, &sol.v, &sol.params, &Sources::none()).unwrap();
        assert_eq!(again.to_bits(), sol.residual_l2.to_bits());
        assert!(sol.residual_l2 <= 1e-7);
    }

    #[test]
    fn max_iter_is_reported() {
        let g = Grid::unit_square(32).unwrap();
        let p = ModelParams::defocusing(100.0);
        let (u, v, _) = gaussian_pair(&g, &p, 1);
        let err = solve_pair(&p, (u, v), 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::MaxIterations { max_iter: 3, .. }));
    }

    #[test]
    fn rejects_negative_or_zero_init() {
        let g = Grid::unit_square(8).unwrap();
        let p = ModelParams::defocusing(1.0);
        let z = Field::zeros(g);
        assert!(solve_pair(&p, (z.clone(), z.clone()), 1e-6, 10).is_err());
        let neg = Field::from_fn_dirichlet(g, |_| -1.0).unwrap();
        assert!(solve_pair(&p, (neg, z), 1e-6, 10).is_err());
    }

    #[test]
    fn unconstrained_defocusing_with_source() {
        // -Δu + u = -u³ + h with h ≥ 0 has a unique nonnegative solution.
        let g = Grid::unit_square(32).unwrap();
        let p = ModelParams { beta: 5.0, omega1: -1.0, omega2: -1.0, lambda: 1.0, mu: 1.0, mass1: None, mass2: None };
        let h = Field::from_fn_dirichlet(g, |q| 10.0 * (PI * q.x()).sin() * (PI * q.y()).sin()).unwrap();
        let sources = Sources { h: Some(h.clone()), k: Some(h) };
        let (u, v, _) = gaussian_pair(&g, &p, 4);
        let sol = solve_pair_with(&p, (u, v), 1e-8, 5000, &SolverConfig::default(), &sources).unwrap();
        assert_eq!(sol.params.lambda, 1.0);
        assert!(sol.residual_l2 <= 1e-8);
        assert!(sol.u.max() > 0.0);
        assert!(sol.h_src.is_some());
    }

    #[test]
    fn mirror_symmetric_bumps_give_mirror_symmetric_solution() {
        let g = Grid::unit_square(64).unwrap();
        let p = ModelParams::defocusing(1e3);
        let (u, v, _) = gaussian_pair(&g, &p, 2);
        let sol = solve_pair(&p, (u, v), 1e-6, 5000).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..65 {
            for i in 0..65 {
                worst = worst.max((sol.u.at(i, j, 0) - sol.v.at(64 - i, j, 0)).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn coupling_energy_falls_with_beta() {
        let g = Grid::unit_square(64).unwrap();
        let mut last = f64::INFINITY;
        for beta in [10.0, 100.0, 1000.0] {
            let p = ModelParams::defocusing(beta);
            let (u, v, _) = gaussian_pair(&g, &p, 5);
            let sol = solve_pair(&p, (u, v), 1e-6, 5000).unwrap();
            let c = 2.0 * sol.energy.coupling;
            assert!(c < last, "β = {beta}: {c} !< {last}");
            last = c;
        }
    }
}
