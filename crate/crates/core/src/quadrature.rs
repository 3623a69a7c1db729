//! Quadrature over balls and spheres centred anywhere inside a grid.
//!
//! Balls use tensor polar sampling: composite two-point Gauss–Legendre panels
//! in the radius times an angular rule (midpoint in the angle on circles,
//! Gauss–Legendre in `cos φ` times midpoint in azimuth on spheres). Field
//! values at the samples come from multilinear interpolation, so no node
//! masking enters the result.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};
use crate::interp::interpolate;

/// Weight multiplying the integrand inside a ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Plain volume integral.
    One,
    /// `1 / |x - x0|^(N-2)`; identically one in two dimensions.
    Acf,
    /// Auxiliary weight `f(|x - x0|)` of the perturbed monotonicity formula.
    FWeight,
    /// `m = -Δf / 2`, supported in the unit ball.
    MWeight,
}

/// The radial profile `f(ρ)`: `(2-N)/2 ρ² + N/2` inside the unit ball and
/// `ρ^(2-N)` outside. It is `C¹` across `ρ = 1`.
pub fn f_weight(rho: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if rho <= 1.0 {
        (2.0 - n) / 2.0 * rho * rho + n / 2.0
    } else {
        rho.powf(2.0 - n)
    }
}

/// `m(ρ) = -Δf(ρ)/2 = N(N-2)/2` inside the unit ball, zero outside.
pub fn m_weight(rho: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if rho <= 1.0 {
        n * (n - 2.0) / 2.0
    } else {
        0.0
    }
}

/// Samples per direction so that sample spacing is at most half a cell.
pub fn default_n_angular(radius: f64, h: f64) -> usize {
    let n = ((4.0 * PI * radius / h).ceil() as usize).max(64);
    n.div_ceil(4) * 4
}

pub fn default_n_radial(radius: f64, h: f64) -> usize {
    ((2.0 * radius / h).ceil() as usize).max(1)
}

/// Precomputed sample points and weights for `B_r(x0)` (or an annulus).
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    grid: Grid,
    center: Point,
    radius: f64,
    inner: f64,
    n_radial: usize,
    n_angular: usize,
    breaks: Vec<f64>,
    points: Vec<Point>,
    weights: Vec<f64>,
    rhos: Vec<f64>,
}

impl BallQuadrature {
    pub fn new(grid: &Grid, center: Point, radius: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        Self::build(grid, center, 0.0, radius, n_radial, n_angular, Vec::new())
    }

    /// Ball with the default sample counts for the grid spacing.
    pub fn with_defaults(grid: &Grid, center: Point, radius: f64) -> Result<Self> {
        let h = grid.h();
        Self::new(grid, center, radius, default_n_radial(radius, h), default_n_angular(radius, h))
    }

    fn build(
        grid: &Grid,
        center: Point,
        inner: f64,
        radius: f64,
        n_radial: usize,
        n_angular: usize,
        breaks: Vec<f64>,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if n_radial == 0 || n_angular < 4 {
            return Err(Error::InvalidArgument(format!(
                "need n_radial >= 1 and n_angular >= 4, got {n_radial}, {n_angular}"
            )));
        }
        if !grid.contains_ball(&center, radius) {
            return Err(Error::OutOfExtent { point: center.0 });
        }
        let dim = grid.dim();
        let (r_nodes, r_weights) = radial_rule(inner, radius, n_radial, &breaks);
        let angular = angular_rule(dim, n_angular);
        let mut points = Vec::with_capacity(r_nodes.len() * angular.len());
        let mut weights = Vec::with_capacity(points.capacity());
        let mut rhos = Vec::with_capacity(points.capacity());
        for (&rho, &wr) in r_nodes.iter().zip(&r_weights) {
            let jac = rho.powi(dim as i32 - 1);
            for (dir, wa) in &angular {
                points.push(center + *dir * rho);
                weights.push(wr * jac * wa);
                rhos.push(rho);
            }
        }
        Ok(BallQuadrature {
            grid: *grid,
            center,
            radius,
            inner,
            n_radial,
            n_angular,
            breaks,
            points,
            weights,
            rhos,
        })
    }

    /// Same sampling density restricted to `inner <= |x - x0| <= radius`.
    pub fn annulus(&self, inner: f64) -> Result<Self> {
        let frac = ((self.radius - inner) / self.radius).clamp(0.0, 1.0);
        let n = ((self.n_radial as f64 * frac).ceil() as usize).max(1);
        Self::build(&self.grid, self.center, inner, self.radius, n, self.n_angular, self.breaks.clone())
    }

    /// Same rule with a radial panel boundary at `rho`, for piecewise kernels.
    pub fn with_break(&self, rho: f64) -> Result<Self> {
        if rho <= self.inner || rho >= self.radius || self.breaks.contains(&rho) {
            return Ok(self.clone());
        }
        let mut breaks = self.breaks.clone();
        breaks.push(rho);
        breaks.sort_by(f64::total_cmp);
        Self::build(&self.grid, self.center, self.inner, self.radius, self.n_radial, self.n_angular, breaks)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i g(x_i)`, summed in sample order.
    pub fn sum(&self, mut g: impl FnMut(&Point, f64) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for ((p, w), rho) in self.points.iter().zip(&self.weights).zip(&self.rhos) {
            total += w * g(p, *rho)?;
        }
        Ok(total)
    }
}

/// Composite two-point Gauss–Legendre rule on `[inner, outer]`, with panel
/// edges forced onto `breaks`.
fn radial_rule(inner: f64, outer: f64, n_panels: usize, breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut edges = vec![inner];
    edges.extend(breaks.iter().copied().filter(|&b| b > inner && b < outer));
    edges.push(outer);
    let span = outer - inner;
    let off = 0.5 / 3f64.sqrt();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let n = ((n_panels as f64 * (b - a) / span).ceil() as usize).max(1);
        let dl = (b - a) / n as f64;
        for k in 0..n {
            let mid = a + (k as f64 + 0.5) * dl;
            nodes.push(mid - off * dl);
            nodes.push(mid + off * dl);
            weights.push(0.5 * dl);
            weights.push(0.5 * dl);
        }
    }
    (nodes, weights)
}

/// Unit directions and weights summing to the measure of the unit sphere.
fn angular_rule(dim: usize, n: usize) -> Vec<(Point, f64)> {
    let dphi = 2.0 * PI / n as f64;
    if dim == 2 {
        return (0..n)
            .map(|j| {
                let t = (j as f64 + 0.5) * dphi;
                (Point::new2(t.cos(), t.sin()), dphi)
            })
            .collect();
    }
    let n_polar = (n / 2).max(2);
    let (mus, wmus) = gauss_legendre(n_polar);
    let mut out = Vec::with_capacity(n_polar * n);
    for (&mu, &wmu) in mus.iter().zip(&wmus) {
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        for j in 0..n {
            let t = (j as f64 + 0.5) * dphi;
            out.push((Point::new3(s * t.cos(), s * t.sin(), mu), wmu * dphi));
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `∫_{B_r} g · kernel` for an integrand given pointwise.
pub fn ball_integral_with(
    q: &BallQuadrature,
    kernel: Kernel,
    mut g: impl FnMut(&Point) -> Result<f64>,
) -> Result<f64> {
    let dim = q.grid.dim();
    match kernel {
        Kernel::One => q.sum(|p, _| g(p)),
        Kernel::Acf if dim == 2 => q.sum(|p, _| Ok(g(p)? * 1.0)),
        Kernel::Acf => {
            // 1/|x - x0| is integrable but singular: integrate on the annulus
            // outside ε = 2h and add g(x0) times ∫_{B_ε} 1/|x| = 2πε².
            let eps = (2.0 * q.grid.h()).min(q.radius);
            let core = g(&q.center)? * 2.0 * PI * eps * eps;
            if eps >= q.radius {
                return Ok(core);
            }
            let ann = q.annulus(eps)?;
            let outer = ann.sum(|p, rho| Ok(g(p)? / rho.powi(dim as i32 - 2)))?;
            Ok(outer + core)
        }
        Kernel::FWeight => q.with_break(1.0)?.sum(|p, rho| Ok(g(p)? * f_weight(rho, dim))),
        Kernel::MWeight => {
            if dim == 2 {
                return Ok(0.0);
            }
            q.with_break(1.0)?.sum(|p, rho| Ok(g(p)? * m_weight(rho, dim)))
        }
    }
}

/// `∫_{B_r(x0)} f · kernel` with `f` interpolated at the samples.
pub fn ball_integral(f: &Field, q: &BallQuadrature, kernel: Kernel) -> Result<f64> {
    f.grid().check_same(&q.grid)?;
    ball_integral_with(q, kernel, |p| interpolate(f, p))
}

/// Surface integral `∫_{∂B_r(center)} g` for a pointwise integrand.
pub fn sphere_integral_with(
    grid: &Grid,
    center: Point,
    r: f64,
    n_angular: usize,
    mut g: impl FnMut(&Point) -> Result<f64>,
) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if n_angular < 4 {
        return Err(Error::InvalidArgument(format!("n_angular must be >= 4, got {n_angular}")));
    }
    if !grid.contains_ball(&center, r) {
        return Err(Error::OutOfExtent { point: center.0 });
    }
    let jac = r.powi(grid.dim() as i32 - 1);
    let mut total = 0.0;
    for (dir, w) in angular_rule(grid.dim(), n_angular) {
        total += w * g(&(center + dir * r))?;
    }
    Ok(total * jac)
}

/// `∫_{∂B_r(center)} f` with `f` interpolated on the angular mesh.
pub fn sphere_integral(f: &Field, center: Point, r: f64, n_angular: usize) -> Result<f64> {
    sphere_integral_with(f.grid(), center, r, n_angular, |p| interpolate(f, p))
}
