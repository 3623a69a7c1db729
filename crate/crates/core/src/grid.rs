//! Uniform Cartesian grids and the scalar fields that live on them.
//!
//! A [`Grid`] is either two- or three-dimensional; two-dimensional grids carry a
//! single layer along the third axis so that indexing code is shared. Node
//! values are stored row-major with the first axis varying fastest.

use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in space. Two-dimensional code leaves the third coordinate at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; 3]);

impl Point {
    pub const ORIGIN: Point = Point([0.0; 3]);

    pub fn new2(x: f64, y: f64) -> Self {
        Point([x, y, 0.0])
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn norm(&self) -> f64 {
        (self.0[0] * self.0[0] + self.0[1] * self.0[1] + self.0[2] * self.0[2]).sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Uniform grid with spacing `h` and `counts[a]` nodes along axis `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    counts: [usize; 3],
    h: f64,
    origin: [f64; 3],
}

impl Grid {
    /// Builds a grid of dimension `counts.len()` (2 or 3).
    pub fn new(counts: &[usize], h: f64, origin: &[f64]) -> Result<Self> {
        let dim = counts.len();
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if origin.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "origin has {} coordinates for a {dim}-d grid",
                origin.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if let Some(&n) = counts.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidGrid(format!("every axis needs at least 3 nodes, got {n}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut c = [1usize; 3];
        let mut o = [0.0; 3];
        c[..dim].copy_from_slice(counts);
        o[..dim].copy_from_slice(origin);
        Ok(Grid { dim, counts: c, h, origin: o })
    }

    /// Square `[0, 1]^2` split into `cells` cells per axis.
    pub fn unit_square(cells: usize) -> Result<Self> {
        Grid::new(&[cells + 1, cells + 1], 1.0 / cells as f64, &[0.0, 0.0])
    }

    /// Square `[lo, hi]^2` split into `cells` cells per axis.
    pub fn square(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Grid::new(&[cells + 1, cells + 1], (hi - lo) / cells as f64, &[lo, lo])
    }

    /// Cube `[lo, hi]^3` split into `cells` cells per axis.
    pub fn cube(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Grid::new(&[cells + 1; 3], (hi - lo) / cells as f64, &[lo, lo, lo])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node counts; trailing entries are 1 for two-dimensional grids.
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        Point(self.origin)
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.counts[0];
        let rest = idx / self.counts[0];
        [i, rest % self.counts[1], rest / self.counts[1]]
    }

    /// Linear offset between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.counts[0],
            _ => self.counts[0] * self.counts[1],
        }
    }

    pub fn node(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + m[a] as f64 * self.h;
        }
        Point(p)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|a| m[a] == 0 || m[a] + 1 == self.counts[a])
    }

    /// `is_boundary` for every node, in storage order.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_boundary(i)).collect()
    }

    /// Physical length of axis `a`, `(count - 1) * h`.
    pub fn extent(&self, axis: usize) -> f64 {
        (self.counts[axis] - 1) as f64 * self.h
    }

    pub fn lower(&self) -> Point {
        Point(self.origin)
    }

    pub fn upper(&self) -> Point {
        let mut p = self.origin;
        for (a, x) in p.iter_mut().enumerate().take(self.dim) {
            *x += self.extent(a);
        }
        Point(p)
    }

    pub fn center(&self) -> Point {
        (self.lower() + self.upper()) * 0.5
    }

    /// Whether `p` lies in the closed grid box, up to `1e-9 h`.
    pub fn contains(&self, p: &Point) -> bool {
        let slack = 1e-9 * self.h;
        (0..self.dim).all(|a| {
            let x = p.0[a];
            x >= self.origin[a] - slack && x <= self.origin[a] + self.extent(a) + slack
        })
    }

    /// Distance from `p` to the boundary of the grid box (negative outside).
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        (0..self.dim)
            .map(|a| {
                let lo = p.0[a] - self.origin[a];
                let hi = self.origin[a] + self.extent(a) - p.0[a];
                lo.min(hi)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the closed ball `B_r(c)` lies in the grid box.
    pub fn contains_ball(&self, c: &Point, r: f64) -> bool {
        self.distance_to_boundary(c) >= r - 1e-9 * self.h
    }

    /// Trapezoidal quadrature weight of node `idx`.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let m = self.multi_index(idx);
        let mut w = self.cell_volume();
        for a in 0..self.dim {
            if m[a] == 0 || m[a] + 1 == self.counts[a] {
                w *= 0.5;
            }
        }
        w
    }

    /// Nearest node to `p`, clamped into the grid.
    pub fn nearest_node(&self, p: &Point) -> usize {
        let mut m = [0usize; 3];
        for a in 0..self.dim {
            let t = ((p.0[a] - self.origin[a]) / self.h).round();
            m[a] = t.clamp(0.0, (self.counts[a] - 1) as f64) as usize;
        }
        self.index(m[0], m[1], m[2])
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A scalar grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Field::from_values(grid, values)
    }

    /// Samples `f` at interior nodes and sets boundary nodes to zero.
    pub fn from_fn_dirichlet(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut field = Field::from_fn(grid, f)?;
        field.enforce_dirichlet();
        Ok(field)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn enforce_dirichlet(&mut self) {
        for idx in 0..self.values.len() {
            if self.grid.is_boundary(idx) {
                self.values[idx] = 0.0;
            }
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        (0..self.values.len()).all(|i| !self.grid.is_boundary(i) || self.values[i] == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    /// Trapezoidal integral over the grid box.
    pub fn integrate(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| v * self.grid.node_weight(i)).sum()
    }

    /// `(integral of f^2)^(1/2)` by trapezoidal node quadrature.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * v * self.grid.node_weight(i))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    /// Writes the binary `GPSF` representation.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let g = &self.grid;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[g.dim as u8])?;
        for a in 0..g.dim {
            w.write_all(&(g.counts[a] as u64).to_le_bytes())?;
        }
        w.write_all(&g.h.to_le_bytes())?;
        for a in 0..g.dim {
            w.write_all(&g.origin[a].to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let [dim] = read_array::<1>(&mut r)?;
        let dim = dim as usize;
        if !(dim == 2 || dim == 3) {
            return Err(Error::Format(format!("unsupported dimension {dim}")));
        }
        let mut counts = Vec::with_capacity(dim);
        for _ in 0..dim {
            let n = u64::from_le_bytes(read_array(&mut r)?);
            counts.push(usize::try_from(n).map_err(|_| Error::Format("count overflow".into()))?);
        }
        let h = f64::from_le_bytes(read_array(&mut r)?);
        let mut origin = Vec::with_capacity(dim);
        for _ in 0..dim {
            origin.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        let grid = Grid::new(&counts, h, &origin).map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Field::from_values(grid, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Field::read_from(std::io::BufReader::new(file))
    }
}

const MAGIC: &[u8; 4] = b"GPSF";
const FORMAT_VERSION: u32 = 1;

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(&[2, 5], 0.1, &[0.0, 0.0]).is_err());
        assert!(Grid::new(&[5, 5], 0.0, &[0.0, 0.0]).is_err());
        assert!(Grid::new(&[5, 5], -1.0, &[0.0, 0.0]).is_err());
        assert!(Grid::new(&[5], 0.1, &[0.0]).is_err());
        assert!(Grid::new(&[5, 5], 0.1, &[0.0]).is_err());
    }

    #[test]
    fn extent_is_count_minus_one_times_h() {
        let g = Grid::new(&[11, 21], 0.05, &[-0.25, 1.0]).unwrap();
        assert!((g.extent(0) - 0.5).abs() < 1e-15);
        assert!((g.extent(1) - 1.0).abs() < 1e-15);
        assert_eq!(g.upper(), Point::new2(0.25, 2.0));
    }

    #[test]
    fn index_round_trips() {
        let g = Grid::cube(0.0, 1.0, 4).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.multi_index(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn trapezoid_integrates_constant_exactly() {
        let g = Grid::unit_square(16).unwrap();
        assert!((Field::constant(g, 1.0).integrate() - 1.0).abs() < 1e-14);
        let g3 = Grid::cube(0.0, 2.0, 8).unwrap();
        assert!((Field::constant(g3, 1.0).integrate() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_constructor_zeroes_boundary() {
        let g = Grid::unit_square(8).unwrap();
        let f = Field::from_fn_dirichlet(g, |_| 1.0).unwrap();
        assert!(f.is_dirichlet());
        assert_eq!(f.get(g.index(4, 4, 0)), 1.0);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = Grid::unit_square(4).unwrap();
        let err = Field::from_fn(g, |p| if p.x() > 0.5 { f64::NAN } else { 0.0 }).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn binary_header_layout() {
        let g = Grid::new(&[3, 4], 0.5, &[1.0, -2.0]).unwrap();
        let f = Field::from_fn(g, |p| p.x() + 10.0 * p.y()).unwrap();
        let mut bytes = Vec::new();
        f.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"GPSF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 2);
        assert_eq!(u64::from_le_bytes(bytes[9..17].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[17..25].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[25..33].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(bytes[33..41].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[41..49].try_into().unwrap()), -2.0);
        assert_eq!(bytes.len(), 49 + 8 * 12);
        assert_eq!(f64::from_le_bytes(bytes[49..57].try_into().unwrap()), f.get(0));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = Field::read_from(&b"GPSX\x01\x00\x00\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    proptest! {
        #[test]
        fn binary_round_trip(nx in 3usize..9, ny in 3usize..9, nz in 3usize..5, three_d: bool,
                             h in 1e-3f64..2.0, seed in any::<u64>()) {
            let grid = if three_d {
                Grid::new(&[nx, ny, nz], h, &[-0.5, 0.25, 1.0]).unwrap()
            } else {
                Grid::new(&[nx, ny], h, &[-0.5, 0.25]).unwrap()
            };
            let f = Field::from_fn(grid, |p| ((p.x() * 7.1 + p.y() * 3.3 + p.z()) * (seed % 97) as f64).sin()).unwrap();
            let mut bytes = Vec::new();
            f.write_to(&mut bytes).unwrap();
            let g = Field::read_from(bytes.as_slice()).unwrap();
            prop_assert_eq!(f, g);
        }
    }
}
