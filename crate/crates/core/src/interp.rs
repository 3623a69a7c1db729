//! Multilinear interpolation of grid fields.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};

/// Cell lookup for a point: lower-corner index and fractional offsets.
#[derive(Clone, Copy, Debug)]
struct Cell {
    base: usize,
    frac: [f64; 3],
}

fn locate(grid: &Grid, p: &Point) -> Result<Cell> {
    if !grid.contains(p) {
        return Err(Error::OutOfExtent { point: p.0 });
    }
    let counts = grid.counts();
    let origin = grid.origin();
    let mut m = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..grid.dim() {
        let mut t = (p.0[a] - origin.0[a]) / grid.h();
        // Snap coordinates that are a node up to rounding, so nodes and grid
        // lines are reproduced exactly.
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            t = r;
        }
        let top = (counts[a] - 2) as f64;
        let cell = t.floor().clamp(0.0, top);
        m[a] = cell as usize;
        frac[a] = (t - cell).clamp(0.0, 1.0);
    }
    Ok(Cell { base: grid.index(m[0], m[1], m[2]), frac })
}

/// Bilinear (2-d) or trilinear (3-d) interpolation of `f` at `p`.
pub fn interpolate(f: &Field, p: &Point) -> Result<f64> {
    let grid = f.grid();
    let cell = locate(grid, p)?;
    let x = f.values();
    let [fx, fy, fz] = cell.frac;
    let sy = grid.stride(1);
    let b = cell.base;
    let plane = |o: usize| {
        let lo = x[o] + fx * (x[o + 1] - x[o]);
        let hi = x[o + sy] + fx * (x[o + sy + 1] - x[o + sy]);
        lo + fy * (hi - lo)
    };
    if grid.dim() == 2 {
        // Written in the weighted-corner form so that node values come out exactly.
        return Ok((1.0 - fx) * (1.0 - fy) * x[b]
            + fx * (1.0 - fy) * x[b + 1]
            + (1.0 - fx) * fy * x[b + sy]
            + fx * fy * x[b + sy + 1]);
    }
    let sz = grid.stride(2);
    let lo = plane(b);
    let hi = plane(b + sz);
    Ok(lo + fz * (hi - lo))
}

/// Gradient of the multilinear interpolant at `p`. The interpolant is
/// piecewise smooth; on a cell face the cell with the larger index wins.
pub fn interpolate_gradient(f: &Field, p: &Point) -> Result<[f64; 3]> {
    let grid = f.grid();
    let cell = locate(grid, p)?;
    let x = f.values();
    let h = grid.h();
    let [fx, fy, fz] = cell.frac;
    let sy = grid.stride(1);
    let b = cell.base;
    if grid.dim() == 2 {
        let (f00, f10, f01, f11) = (x[b], x[b + 1], x[b + sy], x[b + sy + 1]);
        let gx = ((1.0 - fy) * (f10 - f00) + fy * (f11 - f01)) / h;
        let gy = ((1.0 - fx) * (f01 - f00) + fx * (f11 - f10)) / h;
        return Ok([gx, gy, 0.0]);
    }
    let sz = grid.stride(2);
    let c = |di: usize, dj: usize, dk: usize| x[b + di + dj * sy + dk * sz];
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    // d/dx: difference of x-faces, bilinear in (y, z)
    let gx = lerp(
        lerp(c(1, 0, 0) - c(0, 0, 0), c(1, 1, 0) - c(0, 1, 0), fy),
        lerp(c(1, 0, 1) - c(0, 0, 1), c(1, 1, 1) - c(0, 1, 1), fy),
        fz,
    ) / h;
    let gy = lerp(
        lerp(c(0, 1, 0) - c(0, 0, 0), c(1, 1, 0) - c(1, 0, 0), fx),
        lerp(c(0, 1, 1) - c(0, 0, 1), c(1, 1, 1) - c(1, 0, 1), fx),
        fz,
    ) / h;
    let gz = lerp(
        lerp(c(0, 0, 1) - c(0, 0, 0), c(1, 0, 1) - c(1, 0, 0), fx),
        lerp(c(0, 1, 1) - c(0, 1, 0), c(1, 1, 1) - c(1, 1, 0), fx),
        fy,
    ) / h;
    Ok([gx, gy, gz])
}

/// `|∇ I f|^2` at `p`, where `I f` is the multilinear interpolant.
pub fn interpolated_gradient_sq(f: &Field, p: &Point) -> Result<f64> {
    let g = interpolate_gradient(f, p)?;
    Ok(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
}
