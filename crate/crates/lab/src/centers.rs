//! Diagnostic centers on the discrete free boundary.

use seglab_core::{Field, Point};

use crate::error::LabResult;

#[derive(Clone, Debug, PartialEq)]
pub struct CenterPick {
    pub centers: Vec<Point>,
    /// Set when no interior candidate existed and the domain center was used.
    pub warning: Option<String>,
}

/// Picks up to `count` nodes on the discrete interface `{u = v}` at
/// distance at least `margin` from the boundary.
///
/// Candidates are nodes where `u - v` changes sign towards an axis
/// neighbour. They are taken greedily by smallest `u² + v²` among those at
/// least `margin` away from every earlier pick; once none is left the
/// candidate farthest from the picks is used. Ties go to the lower node
/// index, so the result is deterministic.
pub fn auto_centers(u: &Field, v: &Field, count: usize, margin: f64) -> LabResult<CenterPick> {
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let d: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
    let changes = |i: usize, j: usize| {
        let (a, b) = (d[i], d[j]);
        a * b < 0.0 || (a == 0.0) != (b == 0.0)
    };
    let mut candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| !grid.is_boundary(i) && grid.distance_to_boundary(&grid.node(i)) >= margin)
        .filter(|&i| {
            (0..grid.dim()).any(|axis| {
                let s = grid.stride(axis);
                changes(i, i - s) || changes(i, i + s)
            })
        })
        .collect();
    if count == 0 {
        return Ok(CenterPick { centers: Vec::new(), warning: None });
    }
    if candidates.is_empty() {
        let warning = "no interface nodes inside the margin; using the domain center".to_string();
        return Ok(CenterPick { centers: vec![grid.center()], warning: Some(warning) });
    }
    let level = |i: usize| u.get(i) * u.get(i) + v.get(i) * v.get(i);
    candidates.sort_by(|&a, &b| level(a).total_cmp(&level(b)).then(a.cmp(&b)));

    let mut picks: Vec<usize> = Vec::new();
    while picks.len() < count.min(candidates.len()) {
        let nearest = |i: usize| {
            picks.iter().map(|&p| grid.node(p).dist(&grid.node(i))).fold(f64::INFINITY, f64::min)
        };
        let spread = candidates.iter().copied().find(|&i| !picks.contains(&i) && nearest(i) >= margin);
        let next = spread.or_else(|| {
            candidates
                .iter()
                .copied()
                .filter(|i| !picks.contains(i))
                .fold(None, |best: Option<(usize, f64)>, i| {
                    let dist = nearest(i);
                    match best {
                        Some((_, bd)) if bd >= dist => best,
                        _ => Some((i, dist)),
                    }
                })
                .map(|(i, _)| i)
        });
        match next {
            Some(i) => picks.push(i),
            None => break,
        }
    }
    Ok(CenterPick { centers: picks.into_iter().map(|i| grid.node(i)).collect(), warning: None })
}
