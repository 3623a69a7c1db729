//! Second-order finite-difference stencils on Dirichlet grids.

use crate::error::Result;
use crate::grid::{Field, Grid};

/// Discrete Laplacian `Δf` (5-point in 2-d, 7-point in 3-d) at interior nodes.
/// Boundary nodes carry zero.
pub fn laplacian(f: &Field) -> Field {
    let grid = *f.grid();
    let mut out = vec![0.0; grid.len()];
    apply_laplacian(&grid, f.values(), &mut out);
    Field::from_raw(grid, out)
}

pub(crate) fn apply_laplacian(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let dim = grid.dim();
    let counts = grid.counts();
    let [nx, ny, nz] = counts;
    let (klo, khi) = if dim == 3 { (1, nz - 1) } else { (0, 1) };
    for k in klo..khi {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let idx = grid.index(i, j, k);
                let c = x[idx];
                let mut acc = x[idx - 1] + x[idx + 1] - 2.0 * c;
                let sy = grid.stride(1);
                acc += x[idx - sy] + x[idx + sy] - 2.0 * c;
                if dim == 3 {
                    let sz = grid.stride(2);
                    acc += x[idx - sz] + x[idx + sz] - 2.0 * c;
                }
                out[idx] = acc * inv_h2;
            }
        }
    }
    for k in 0..nz {
        for j in 0..ny {
            let row = grid.index(0, j, k);
            let face = j == 0 || j + 1 == ny || (dim == 3 && (k == 0 || k + 1 == nz));
            if face {
                out[row..row + nx].iter_mut().for_each(|o| *o = 0.0);
            } else {
                out[row] = 0.0;
                out[row + nx - 1] = 0.0;
            }
        }
    }
}

/// `|∇f|^2` by central differences at interior nodes and one-sided differences
/// on the boundary.
pub fn gradient_sq(f: &Field) -> Field {
    let grid = *f.grid();
    let h = grid.h();
    let counts = grid.counts();
    let x = f.values();
    let values = (0..grid.len())
        .map(|idx| {
            let m = grid.multi_index(idx);
            (0..grid.dim())
                .map(|a| {
                    let s = grid.stride(a);
                    let d = if m[a] == 0 {
                        (x[idx + s] - x[idx]) / h
                    } else if m[a] + 1 == counts[a] {
                        (x[idx] - x[idx - s]) / h
                    } else {
                        (x[idx + s] - x[idx - s]) / (2.0 * h)
                    };
                    d * d
                })
                .sum()
        })
        .collect();
    Field::from_raw(grid, values)
}

/// Edge-based Dirichlet form `Σ_edges (f_i - f_j)^2 h^(d-2)`, the discrete
/// `∫|∇f|^2` consistent with [`laplacian`] (equals `-Σ f Δf h^d` for
/// Dirichlet fields).
pub fn dirichlet_form(f: &Field) -> f64 {
    let grid = f.grid();
    let x = f.values();
    let counts = grid.counts();
    let scale = grid.cell_volume() / (grid.h() * grid.h());
    let mut total = 0.0;
    for idx in 0..grid.len() {
        let m = grid.multi_index(idx);
        for a in 0..grid.dim() {
            if m[a] + 1 < counts[a] {
                let d = x[idx + grid.stride(a)] - x[idx];
                total += d * d;
            }
        }
    }
    total * scale
}

/// Dirichlet form restricted to edges between interior nodes plus edges to
/// boundary nodes, i.e. the bilinear form `Σ u_i (-Δ v)_i h^d` over interior
/// nodes. Used by Rayleigh quotients.
pub fn dirichlet_pairing(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    let lap = laplacian(v);
    let grid = u.grid();
    let vol = grid.cell_volume();
    Ok(-(0..grid.len())
        .filter(|&i| !grid.is_boundary(i))
        .map(|i| u.get(i) * lap.get(i))
        .sum::<f64>()
        * vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn interior(g: &Grid) -> impl Iterator<Item = usize> + '_ {
        (0..g.len()).filter(|&i| !g.is_boundary(i))
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = Grid::unit_square(8).unwrap();
        assert!(laplacian(&Field::zeros(g)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_exact_on_affine() {
        let g = Grid::square(-1.0, 1.0, 20).unwrap();
        let f = Field::from_fn(g, |p| p.x() + p.y()).unwrap();
        let lap = laplacian(&f);
        for i in interior(&g) {
            assert!(lap.get(i).abs() < 1e-10, "node {i}: {}", lap.get(i));
        }
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        // (x+h)^2 + (x-h)^2 - 2x^2 = 2h^2 per axis, so the stencil gives exactly 4.
        let g = Grid::square(-1.0, 1.0, 32).unwrap();
        let f = Field::from_fn(g, |p| p.x() * p.x() + p.y() * p.y()).unwrap();
        let lap = laplacian(&f);
        for i in interior(&g) {
            assert!((lap.get(i) - 4.0).abs() < 1e-9);
        }
        for i in (0..g.len()).filter(|&i| g.is_boundary(i)) {
            assert_eq!(lap.get(i), 0.0);
        }
    }

    #[test]
    fn laplacian_3d_quadratic() {
        let g = Grid::cube(-1.0, 1.0, 10).unwrap();
        let f = Field::from_fn(g, |p| p.norm().powi(2)).unwrap();
        let lap = laplacian(&f);
        for i in interior(&g) {
            assert!((lap.get(i) - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_sq_of_constant_and_affine() {
        let g = Grid::unit_square(16).unwrap();
        let c = gradient_sq(&Field::constant(g, 3.5));
        assert!(c.values().iter().all(|&v| v == 0.0));
        let x = gradient_sq(&Field::from_fn(g, |p| p.x()).unwrap());
        for i in 0..g.len() {
            assert!((x.get(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_sq_sine_truncation() {
        // Central differences give π cos(πx) sinc(πh), so the error is
        // π² cos² (1 - sinc²) ≤ π⁴h²/3 to leading order (≈ 2.0e-3 at h = 1/128).
        let g = Grid::unit_square(128).unwrap();
        let h = g.h();
        let f = Field::from_fn(g, |p| (PI * p.x()).sin()).unwrap();
        let gs = gradient_sq(&f);
        let bound = PI.powi(4) * h * h / 3.0;
        let mut worst: f64 = 0.0;
        for i in interior(&g) {
            let x = g.node(i).x();
            let exact = (PI * (PI * x).cos()).powi(2);
            worst = worst.max((gs.get(i) - exact).abs());
        }
        assert!(worst <= bound * 1.001, "worst {worst} vs bound {bound}");
        assert!(worst / (PI * PI) < 1e-3);
    }

    #[test]
    fn dirichlet_form_matches_pairing() {
        let g = Grid::unit_square(32).unwrap();
        let f = Field::from_fn_dirichlet(g, |p| p.x() * (1.0 - p.x()) * (p.y() * 3.0).sin()).unwrap();
        let a = dirichlet_form(&f);
        let b = dirichlet_pairing(&f, &f).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn dirichlet_form_converges_for_sine_product() {
        let g = Grid::unit_square(128).unwrap();
        let f = Field::from_fn_dirichlet(g, |p| (PI * p.x()).sin() * (PI * p.y()).sin()).unwrap();
        let exact = PI * PI / 2.0;
        assert!((dirichlet_form(&f) - exact).abs() / exact < 1e-4);
    }
}
