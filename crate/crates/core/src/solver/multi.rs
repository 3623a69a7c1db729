//! The k-component generalisation: `-Δu_i + λ_i u_i = ω_i u_i³ - u_i Σ_j β_ij u_j² + h_i`.

use serde::{Deserialize, Serialize};

use super::flow::{advance_component, rescale_to_mass};
use super::{component_residual, interior_l2, realized_multiplier, ModelParams, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::stencil::dirichlet_form;

/// Coefficients of a k-component system with symmetric, zero-diagonal coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiParams {
    pub coupling: Vec<Vec<f64>>,
    pub omegas: Vec<f64>,
    /// Inputs for unconstrained components, realized multipliers otherwise.
    pub lambdas: Vec<f64>,
    pub masses: Vec<Option<f64>>,
}

impl MultiParams {
    pub fn from_pair(p: &ModelParams) -> Self {
        MultiParams {
            coupling: vec![vec![0.0, p.beta], vec![p.beta, 0.0]],
            omegas: vec![p.omega1, p.omega2],
            lambdas: vec![p.lambda, p.mu],
            masses: vec![p.mass1, p.mass2],
        }
    }

    pub fn k(&self) -> usize {
        self.omegas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 components, got {k}")));
        }
        if self.lambdas.len() != k || self.masses.len() != k || self.coupling.len() != k {
            return Err(Error::InvalidArgument("component counts disagree".into()));
        }
        for i in 0..k {
            if self.coupling[i].len() != k {
                return Err(Error::InvalidArgument("coupling matrix must be k x k".into()));
            }
            if self.coupling[i][i] != 0.0 {
                return Err(Error::InvalidArgument("coupling diagonal must be zero".into()));
            }
            for j in 0..k {
                let b = self.coupling[i][j];
                if !(b >= 0.0 && b.is_finite()) || b != self.coupling[j][i] {
                    return Err(Error::InvalidArgument(format!("coupling[{i}][{j}] must be symmetric and >= 0")));
                }
            }
            match self.masses[i] {
                Some(m) if !(m > 0.0 && m.is_finite()) => {
                    return Err(Error::InvalidArgument(format!("mass {i} must be positive")));
                }
                None if self.omegas[i] > 0.0 => {
                    return Err(Error::InvalidArgument(format!("focusing component {i} needs a mass")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn repulsion(&self, fields: &[Field], i: usize) -> Vec<f64> {
        let n = fields[i].grid().len();
        let mut rep = vec![0.0; n];
        for (j, f) in fields.iter().enumerate() {
            let b = self.coupling[i][j];
            if j == i {
                continue;
            }
            for (r, &x) in rep.iter_mut().zip(f.values()) {
                *r += b * x * x;
            }
        }
        rep
    }
}

#[derive(Clone, Debug)]
pub struct MultiSolution {
    pub fields: Vec<Field>,
    pub params: MultiParams,
    pub residual_l2: f64,
    pub iterations: usize,
    pub dt_final: f64,
}

/// One Jacobi-style step for all components. Returns the new fields, the
/// multipliers after the step and the CG iteration count.
pub fn flow_step_k(
    fields: &[Field],
    p: &MultiParams,
    dt: f64,
    cfg: &SolverConfig,
    sources: &[Option<Field>],
) -> Result<(Vec<Field>, Vec<f64>, usize)> {
    check_shapes(fields, p, sources)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(fields.len());
    let mut cg = 0;
    for i in 0..fields.len() {
        let fixed = if p.masses[i].is_some() { 0.0 } else { p.lambdas[i] };
        let (f, it) = advance_component(
            &fields[i],
            &p.repulsion(fields, i),
            p.omegas[i],
            source(sources, i),
            fixed,
            p.masses[i],
            dt,
            cfg,
        )?;
        out.push(f);
        cg += it;
    }
    let lambdas = (0..out.len())
        .map(|i| match p.masses[i] {
            Some(_) => realized_multiplier(&out[i], &p.repulsion(&out, i), p.omegas[i], source(sources, i)),
            None => p.lambdas[i],
        })
        .collect();
    Ok((out, lambdas, cg))
}

fn source(sources: &[Option<Field>], i: usize) -> Option<&Field> {
    sources.get(i).and_then(|s| s.as_ref())
}

fn check_shapes(fields: &[Field], p: &MultiParams, sources: &[Option<Field>]) -> Result<()> {
    if fields.len() != p.k() {
        return Err(Error::InvalidArgument(format!("{} fields for {} components", fields.len(), p.k())));
    }
    if !sources.is_empty() && sources.len() != p.k() {
        return Err(Error::InvalidArgument("one source slot per component".into()));
    }
    for f in fields.iter().chain(sources.iter().flatten()) {
        f.check_same_grid(&fields[0])?;
    }
    Ok(())
}

fn flow_energy(fields: &[Field], p: &MultiParams, sources: &[Option<Field>]) -> f64 {
    let k = fields.len();
    let grid = fields[0].grid();
    let mut m4 = vec![0.0; k];
    let mut cross = vec![vec![0.0; k]; k];
    let mut fixed = 0.0;
    let mut work = 0.0;
    for n in 0..grid.len() {
        let w = grid.node_weight(n);
        let sq: Vec<f64> = fields.iter().map(|f| f.get(n) * f.get(n)).collect();
        for i in 0..k {
            m4[i] += w * sq[i] * sq[i];
            for j in i + 1..k {
                cross[i][j] += w * sq[i] * sq[j];
            }
        }
        for i in 0..k {
            if p.masses[i].is_none() {
                fixed += 0.5 * w * p.lambdas[i] * fields[i].get(n) * fields[i].get(n);
            }
        }
        for i in 0..k {
            if let Some(s) = source(sources, i) {
                work += w * s.get(n) * fields[i].get(n);
            }
        }
    }
    let kinetic = 0.5 * fields.iter().fold(0.0, |acc, f| acc + dirichlet_form(f));
    let quartic = -0.25 * (0..k).fold(0.0, |acc, i| acc + p.omegas[i] * m4[i]);
    let mut coupling_sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            coupling_sum += p.coupling[i][j] * cross[i][j];
        }
    }
    let coupling = 0.5 * coupling_sum;
    kinetic + quartic + coupling - work + fixed
}

fn residual(fields: &[Field], p: &MultiParams, sources: &[Option<Field>]) -> f64 {
    (0..fields.len()).fold(0.0, |acc: f64, i| {
        let r = component_residual(&fields[i], &p.repulsion(fields, i), p.omegas[i], source(sources, i), p.lambdas[i]);
        acc.hypot(interior_l2(&r))
    })
}

/// k-component analogue of [`super::solve_pair_with`], with the same step
/// control. `sources` is empty or holds one optional source per component.
pub fn solve_k(
    p: &MultiParams,
    init: Vec<Field>,
    tol: f64,
    max_iter: usize,
    cfg: &SolverConfig,
    sources: &[Option<Field>],
) -> Result<MultiSolution> {
    p.validate()?;
    let mut fields = init;
    check_shapes(&fields, p, sources)?;
    if fields.iter().any(|f| f.min() < 0.0) {
        return Err(Error::InvalidArgument("initial data must be nonnegative".into()));
    }
    if fields.iter().all(|f| f.max_abs() == 0.0) {
        return Err(Error::InvalidArgument("initial data must be nonzero".into()));
    }
    fields.iter_mut().for_each(Field::enforce_dirichlet);
    let grid = *fields[0].grid();
    let dt0 = cfg.dt.unwrap_or(0.4 * grid.h() * grid.h());
    let dt_floor = dt0 * 1e-6;
    let mut dt = dt0;
    let mut params = p.clone();
    for (f, m) in fields.iter_mut().zip(&p.masses) {
        if let Some(m) = m {
            *f = rescale_to_mass(f, *m);
        }
    }
    for i in 0..fields.len() {
        if p.masses[i].is_some() {
            params.lambdas[i] =
                realized_multiplier(&fields[i], &p.repulsion(&fields, i), p.omegas[i], source(sources, i));
        }
    }

    let mut e = flow_energy(&fields, &params, sources);
    let mut res = residual(&fields, &params, sources);
    let mut iterations = 0;
    while res > tol {
        if iterations >= max_iter {
            return Err(Error::MaxIterations { max_iter, residual: res });
        }
        iterations += 1;
        let (next, lambdas) = match flow_step_k(&fields, &params, dt, cfg, sources) {
            Ok((f, l, _)) => (f, l),
            Err(Error::NonFinite { .. }) => return Err(Error::NanDetected { step: iterations }),
            Err(e) => return Err(e),
        };
        let e_new = flow_energy(&next, &params, sources);
        if !e_new.is_finite() || lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NanDetected { step: iterations });
        }
        if e_new > e + 1e-12 * e.abs().max(1.0) && dt > dt_floor {
            dt *= 0.5;
            continue;
        }
        fields = next;
        params.lambdas = lambdas;
        e = e_new;
        dt = (dt * cfg.dt_growth).min(cfg.dt_max.max(dt0));
        res = residual(&fields, &params, sources);
    }
    let residual_l2 = residual(&fields, &params, sources);
    Ok(MultiSolution { fields, params, residual_l2, iterations, dt_final: dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::solver::{flow_step, gaussian_pair, solve_pair};

    #[test]
    fn two_components_match_pair_path_bitwise() {
        let g = Grid::unit_square(32).unwrap();
        let p = ModelParams { omega2: -0.5, mass2: Some(1.5), ..ModelParams::defocusing(300.0) };
        let (u, v, _) = gaussian_pair(&g, &p, 21);
        let mp = MultiParams::from_pair(&p);

        let s = flow_step(&u, &v, &p, 1e-3).unwrap();
        let (f, l, _) = flow_step_k(&[u.clone(), v.clone()], &mp, 1e-3, &SolverConfig::default(), &[]).unwrap();
        assert_eq!(s.u, f[0]);
        assert_eq!(s.v, f[1]);
        assert_eq!(s.lambda.to_bits(), l[0].to_bits());
        assert_eq!(s.mu.to_bits(), l[1].to_bits());

        let a = solve_pair(&p, (u.clone(), v.clone()), 1e-6, 5000).unwrap();
        let b = solve_k(&mp, vec![u, v], 1e-6, 5000, &SolverConfig::default(), &[]).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.u, b.fields[0]);
        assert_eq!(a.v, b.fields[1]);
        assert_eq!(a.residual_l2.to_bits(), b.residual_l2.to_bits());
        assert_eq!(a.params.lambda.to_bits(), b.params.lambdas[0].to_bits());
    }

    #[test]
    fn three_components_stay_nonnegative_with_mass() {
        let g = Grid::unit_square(24).unwrap();
        let c = 50.0;
        let p = MultiParams {
            coupling: vec![vec![0.0, c, c], vec![c, 0.0, c], vec![c, c, 0.0]],
            omegas: vec![-1.0; 3],
            lambdas: vec![0.0; 3],
            masses: vec![Some(1.0); 3],
        };
        let bumps: Vec<Field> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&x0| Field::from_fn_dirichlet(g, |q| (-((q.x() - x0).powi(2) + (q.y() - 0.5).powi(2)) * 40.0).exp()).unwrap())
            .collect();
        let (f, _, _) = flow_step_k(&bumps, &p, 1e-4, &SolverConfig::default(), &[]).unwrap();
        for x in &f {
            assert!(x.min() >= 0.0);
            assert!((x.l2_norm().powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric_coupling() {
        let mut p = MultiParams::from_pair(&ModelParams::defocusing(1.0));
        p.coupling[0][1] = 2.0;
        assert!(p.validate().is_err());
        let mut p = MultiParams::from_pair(&ModelParams::defocusing(1.0));
        p.coupling[0][0] = 1.0;
        assert!(p.validate().is_err());
    }
}
