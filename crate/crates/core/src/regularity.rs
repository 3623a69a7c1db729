//! Hölder seminorms over node pairs and the blow-up rescaling around the
//! achieving pair.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};
use crate::solver::SolutionPair;
use crate::stencil::laplacian;

/// `|x_a - x_b|^α` for two nodes, from their integer offsets.
///
/// Every seminorm quotient in this module divides by this value, so a
/// brute-force search using it reproduces the pruned search bit for bit.
pub fn node_distance_pow(grid: &Grid, a: usize, b: usize, alpha: f64) -> f64 {
    dist_pow(grid.h(), offset_sq(grid, a, b), alpha)
}

fn dist_pow(h: f64, s: usize, alpha: f64) -> f64 {
    (h * h * s as f64).powf(0.5 * alpha)
}

fn offset_sq(grid: &Grid, a: usize, b: usize) -> usize {
    let (ma, mb) = (grid.multi_index(a), grid.multi_index(b));
    (0..3).map(|k| ma[k].abs_diff(mb[k]).pow(2)).sum()
}

/// The maximising pair of a Hölder quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub alpha: f64,
    /// The seminorm `L`.
    pub l: f64,
    pub x_pair: Point,
    pub y_pair: Point,
    /// Node indices of the pair, `x_index < y_index`.
    pub x_index: usize,
    pub y_index: usize,
    /// `|x_pair - y_pair|`.
    pub r_beta: f64,
    /// 0 when the first field achieves the maximum, 1 for the second.
    pub component: usize,
    /// Grid spacing; the node maximum under-estimates the continuum supremum
    /// by a mesh-modulus term.
    pub h: f64,
}

/// Candidate ordering: larger quotient first, then smaller
/// `(component, a, b)`.
#[derive(Clone, Copy, Debug)]
struct Best {
    q: f64,
    comp: usize,
    a: usize,
    b: usize,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.q > other.q || (self.q == other.q && (self.comp, self.a, self.b) < (other.comp, other.a, other.b))
    }
}

#[derive(Clone, Debug)]
struct Boxes {
    lo: Vec<[usize; 3]>,
    hi: Vec<[usize; 3]>,
    children: Vec<Option<(usize, usize)>>,
    len: Vec<usize>,
}

const LEAF: usize = 16;

impl Boxes {
    fn build(grid: &Grid) -> Self {
        let mut t = Boxes { lo: Vec::new(), hi: Vec::new(), children: Vec::new(), len: Vec::new() };
        let c = grid.counts();
        t.split([0, 0, 0], [c[0] - 1, c[1] - 1, c[2] - 1]);
        t
    }

    fn split(&mut self, lo: [usize; 3], hi: [usize; 3]) -> usize {
        let id = self.lo.len();
        let len = (0..3).map(|k| hi[k] - lo[k] + 1).product();
        self.lo.push(lo);
        self.hi.push(hi);
        self.children.push(None);
        self.len.push(len);
        if len > LEAF {
            let axis = (0..3).max_by_key(|&k| (hi[k] - lo[k], 3 - k)).unwrap_or(0);
            let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
            let mut hi_a = hi;
            hi_a[axis] = mid;
            let mut lo_b = lo;
            lo_b[axis] = mid + 1;
            let a = self.split(lo, hi_a);
            let b = self.split(lo_b, hi);
            self.children[id] = Some((a, b));
        }
        id
    }

    fn nodes(&self, grid: &Grid, id: usize) -> Vec<usize> {
        let (lo, hi) = (self.lo[id], self.hi[id]);
        let mut out = Vec::with_capacity(self.len[id]);
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    out.push(grid.index(i, j, k));
                }
            }
        }
        out
    }

    /// Smallest squared integer offset between distinct nodes of two boxes.
    fn gap_sq(&self, a: usize, b: usize) -> usize {
        let s: usize = (0..3)
            .map(|k| {
                let g = self.lo[b][k].saturating_sub(self.hi[a][k]).max(self.lo[a][k].saturating_sub(self.hi[b][k]));
                g * g
            })
            .sum();
        s.max(1)
    }

    fn range(&self, values: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let n = self.lo.len();
        let (mut mn, mut mx) = (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]);
        // children are created after their parent, so fill in reverse
        for id in (0..n).rev() {
            match self.children[id] {
                Some((a, b)) => {
                    mn[id] = mn[a].min(mn[b]);
                    mx[id] = mx[a].max(mx[b]);
                }
                None => {
                    for i in self.nodes(grid, id) {
                        mn[id] = mn[id].min(values[i]);
                        mx[id] = mx[id].max(values[i]);
                    }
                }
            }
        }
        (mn, mx)
    }
}

#[derive(PartialEq)]
struct Task {
    bound: f64,
    a: usize,
    b: usize,
}

impl Eq for Task {}

impl Ord for Task {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

impl PartialOrd for Task {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Margin covering rounding in the bound's denominator.
const BOUND_SLACK: f64 = 1.0 - 4.0 * f64::EPSILON;

fn search_component(
    grid: &Grid,
    tree: &Boxes,
    table: &[f64],
    values: &[f64],
    comp: usize,
    best: &mut Best,
) {
    let (mn, mx) = tree.range(values, grid);
    let bound = |a: usize, b: usize| {
        let osc = (mx[a] - mn[b]).max(mx[b] - mn[a]).max(0.0);
        osc / (table[tree.gap_sq(a, b)] * BOUND_SLACK)
    };
    // seed the incumbent with the extreme values
    let (imin, imax) = extreme_indices(values);
    if imin != imax {
        let (a, b) = (imin.min(imax), imin.max(imax));
        let cand = Best { q: (values[a] - values[b]).abs() / table[offset_sq(grid, a, b)], comp, a, b };
        if cand.beats(best) {
            *best = cand;
        }
    }
    let mut heap = BinaryHeap::new();
    heap.push(Task { bound: bound(0, 0), a: 0, b: 0 });
    while let Some(Task { bound: ub, a, b }) = heap.pop() {
        let min_a = grid_index_of(grid, tree.lo[a]).min(grid_index_of(grid, tree.lo[b]));
        if ub < best.q || (ub == best.q && (comp, min_a) > (best.comp, best.a)) {
            continue;
        }
        match (tree.children[a], tree.children[b]) {
            (None, None) => leaf_pair(grid, tree, table, values, comp, a, b, best),
            (ca, cb) => {
                if a == b {
                    let (c0, c1) = ca.expect("non-leaf");
                    for (x, y) in [(c0, c0), (c0, c1), (c1, c1)] {
                        heap.push(Task { bound: bound(x, y), a: x, b: y });
                    }
                } else {
                    let split_a = cb.is_none() || (ca.is_some() && tree.len[a] >= tree.len[b]);
                    let (keep, (c0, c1)) = if split_a { (b, ca.expect("non-leaf")) } else { (a, cb.expect("non-leaf")) };
                    for c in [c0, c1] {
                        heap.push(Task { bound: bound(c, keep), a: c, b: keep });
                    }
                }
            }
        }
    }
}

fn grid_index_of(grid: &Grid, m: [usize; 3]) -> usize {
    grid.index(m[0], m[1], m[2])
}

fn extreme_indices(values: &[f64]) -> (usize, usize) {
    let (mut lo, mut hi) = (0, 0);
    for (i, &v) in values.iter().enumerate() {
        if v < values[lo] {
            lo = i;
        }
        if v > values[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

#[allow(clippy::too_many_arguments)]
fn leaf_pair(
    grid: &Grid,
    tree: &Boxes,
    table: &[f64],
    values: &[f64],
    comp: usize,
    a: usize,
    b: usize,
    best: &mut Best,
) {
    let na = tree.nodes(grid, a);
    let nb = tree.nodes(grid, b);
    for &i in &na {
        for &j in &nb {
            if i == j || (a == b && j < i) {
                continue;
            }
            let (x, y) = (i.min(j), i.max(j));
            let cand = Best { q: (values[x] - values[y]).abs() / table[offset_sq(grid, x, y)], comp, a: x, b: y };
            if cand.beats(best) {
                *best = cand;
            }
        }
    }
}

/// Exact maximum over node pairs of `|f(x) - f(y)| / |x - y|^α`, taken over
/// `f` and, when given, `g`.
///
/// The search runs over pairs of boxes from a min/max tree and skips any box
/// pair whose oscillation over minimal distance cannot beat the incumbent.
/// Ties go to the smaller `(component, x index, y index)`.
pub fn holder_seminorm(f: &Field, g: Option<&Field>, alpha: f64) -> Result<HolderReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if let Some(g) = g {
        f.check_same_grid(g)?;
    }
    let grid = *f.grid();
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two nodes".into()));
    }
    let c = grid.counts();
    let max_s = (0..3).map(|k| (c[k] - 1).pow(2)).sum::<usize>();
    let table: Vec<f64> = (0..=max_s).map(|s| dist_pow(grid.h(), s, alpha)).collect();
    let tree = Boxes::build(&grid);
    let fv = f.values();
    let mut best = Best { q: (fv[0] - fv[1]).abs() / table[offset_sq(&grid, 0, 1)], comp: 0, a: 0, b: 1 };
    search_component(&grid, &tree, &table, fv, 0, &mut best);
    if let Some(g) = g {
        search_component(&grid, &tree, &table, g.values(), 1, &mut best);
    }
    let (x, y) = (grid.node(best.a), grid.node(best.b));
    Ok(HolderReport {
        alpha,
        l: best.q,
        x_pair: x,
        y_pair: y,
        x_index: best.a,
        y_index: best.b,
        r_beta: x.dist(&y),
        component: best.comp,
        h: grid.h(),
    })
}

/// Discrete Lipschitz constant: the `α = 1` seminorm of a single field.
pub fn lipschitz_seminorm(f: &Field) -> Result<f64> {
    Ok(holder_seminorm(f, None, 1.0)?.l)
}

/// One blow-up frame `ū(x) = u(x_β + r_β x) / (L r_β^α)` around the
/// achieving pair.
#[derive(Clone, Debug)]
pub struct BlowupFrame {
    pub u_bar: Field,
    pub v_bar: Field,
    pub meta: BlowupMeta,
}

/// Scalars of a [`BlowupFrame`], serialisable as a sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupMeta {
    pub alpha: f64,
    pub beta: f64,
    pub l_beta: f64,
    pub r_beta: f64,
    pub x_beta: Point,
    pub y_beta: Point,
    /// `L² r^(2α+2)`.
    pub m_beta: f64,
    pub beta_m_beta: f64,
    /// Covered source region, lower and upper corners.
    pub window_lo: Point,
    pub window_hi: Point,
    /// Set when the requested window was clipped by the domain boundary.
    pub half_space_like: bool,
    /// Seminorm of the frame itself at the same exponent.
    pub rescaled_holder: f64,
}

/// Rescales `sol` around the pair of `report`.
///
/// The frame grid has spacing `h / r_β` in rescaled units, so its nodes are
/// source nodes and no interpolation enters. The window spans
/// `max(2, ⌊W r_β / h⌋)` source cells on each side of `x_β`, clipped at the
/// boundary (which sets `half_space_like`).
pub fn blowup_rescale(sol: &SolutionPair, report: &HolderReport, window_halfwidth: f64) -> Result<BlowupFrame> {
    if !(window_halfwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("window half-width must be positive, got {window_halfwidth}")));
    }
    let grid = *sol.u.grid();
    if !(report.r_beta > 0.0 && report.l > 0.0) {
        return Err(Error::InvalidArgument("blow-up needs a nonconstant pair".into()));
    }
    let h = grid.h();
    let r = report.r_beta;
    let m = ((window_halfwidth * r / h).floor() as usize).max(2);
    let centre = grid.multi_index(report.x_index);
    let counts = grid.counts();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut clipped = false;
    for a in 0..grid.dim() {
        lo[a] = centre[a].saturating_sub(m);
        hi[a] = (centre[a] + m).min(counts[a] - 1);
        clipped |= lo[a] + m != centre[a] || hi[a] != centre[a] + m;
    }
    let dims: Vec<usize> = (0..grid.dim()).map(|a| hi[a] - lo[a] + 1).collect();
    let origin: Vec<f64> = (0..grid.dim()).map(|a| (lo[a] as f64 - centre[a] as f64) * h / r).collect();
    let frame_grid = Grid::new(&dims, h / r, &origin)?;
    let scale = 1.0 / (report.l * r.powf(report.alpha));
    let pick = |f: &Field| {
        let vals = (0..frame_grid.len())
            .map(|idx| {
                let m = frame_grid.multi_index(idx);
                f.at(lo[0] + m[0], lo[1] + m[1], lo[2] + m[2]) * scale
            })
            .collect();
        Field::from_raw(frame_grid, vals)
    };
    let u_bar = pick(&sol.u);
    let v_bar = pick(&sol.v);
    let rescaled_holder = holder_seminorm(&u_bar, Some(&v_bar), report.alpha)?.l;
    let m_beta = report.l * report.l * r.powf(2.0 * report.alpha + 2.0);
    let beta = sol.params.beta;
    let meta = BlowupMeta {
        alpha: report.alpha,
        beta,
        l_beta: report.l,
        r_beta: r,
        x_beta: report.x_pair,
        y_beta: report.y_pair,
        m_beta,
        beta_m_beta: beta * m_beta,
        window_lo: grid.node(grid.index(lo[0], lo[1], lo[2])),
        window_hi: grid.node(grid.index(hi[0], hi[1], hi[2])),
        half_space_like: clipped,
        rescaled_holder,
    };
    Ok(BlowupFrame { u_bar, v_bar, meta })
}

/// Sizes of the terms that vanish along a blow-up sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingTerms {
    /// `|λ| r² ‖ū‖∞` and `|μ| r² ‖v̄‖∞`.
    pub lambda_term: f64,
    pub mu_term: f64,
    /// `|ω₁| M ‖ū‖∞³` and `|ω₂| M ‖v̄‖∞³`.
    pub omega1_term: f64,
    pub omega2_term: f64,
    /// `‖h̄‖` and `‖k̄‖` over the window, with `h̄ = r^(2-α) h(x_β + r x) / L`.
    pub h_bar: f64,
    pub k_bar: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledResidual {
    pub res_u: f64,
    pub res_v: f64,
    pub vanishing: VanishingTerms,
}

/// Residual of the rescaled system
/// `-Δū + λr²ū = ω₁Mū³ - βMūv̄² + h̄` (and its `v̄` twin) in `L²` over the
/// frame interior, in rescaled units.
pub fn rescaled_residual(frame: &BlowupFrame, sol: &SolutionPair) -> Result<RescaledResidual> {
    let meta = &frame.meta;
    let fg = *frame.u_bar.grid();
    let src = *sol.u.grid();
    let r = meta.r_beta;
    let m = meta.m_beta;
    let p = &sol.params;
    let src_scale = r.powf(2.0 - meta.alpha) / meta.l_beta;
    let lo = src.multi_index(src.nearest_node(&meta.window_lo));
    let source_at = |f: &Option<Field>, idx: usize| -> f64 {
        f.as_ref().map_or(0.0, |f| {
            let k = fg.multi_index(idx);
            f.at(lo[0] + k[0], lo[1] + k[1], lo[2] + k[2]) * src_scale
        })
    };
    let (lu, lv) = (laplacian(&frame.u_bar), laplacian(&frame.v_bar));
    let vol = fg.cell_volume();
    let (mut su, mut sv, mut sh, mut sk) = (0.0, 0.0, 0.0, 0.0);
    for idx in 0..fg.len() {
        let (hb, kb) = (source_at(&sol.h_src, idx), source_at(&sol.k_src, idx));
        sh += hb * hb * fg.node_weight(idx);
        sk += kb * kb * fg.node_weight(idx);
        if fg.is_boundary(idx) {
            continue;
        }
        let (a, b) = (frame.u_bar.get(idx), frame.v_bar.get(idx));
        let ru = -lu.get(idx) + p.lambda * r * r * a - p.omega1 * m * a * a * a + p.beta * m * a * b * b - hb;
        let rv = -lv.get(idx) + p.mu * r * r * b - p.omega2 * m * b * b * b + p.beta * m * a * a * b - kb;
        su += ru * ru;
        sv += rv * rv;
    }
    let (ub, vb) = (frame.u_bar.max_abs(), frame.v_bar.max_abs());
    Ok(RescaledResidual {
        res_u: (su * vol).sqrt(),
        res_v: (sv * vol).sqrt(),
        vanishing: VanishingTerms {
            lambda_term: p.lambda.abs() * r * r * ub,
            mu_term: p.mu.abs() * r * r * vb,
            omega1_term: p.omega1.abs() * m * ub.powi(3),
            omega2_term: p.omega2.abs() * m * vb.powi(3),
            h_bar: sh.sqrt(),
            k_bar: sk.sqrt(),
        },
    })
}
