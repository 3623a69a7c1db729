use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::grid::{Field, Grid, Point};

/// What [`gaussian_pair`] chose, for solve metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub seed: u64,
    pub center_u: [f64; 3],
    pub center_v: [f64; 3],
    pub width: f64,
}

/// Two off-center Gaussian bumps, `v` the mirror image of `u` across the
/// plane `x = center`. The seed jitters the bump position and width; the
/// mirror relation holds node-for-node for every seed. Each component is
/// scaled to its target mass, or to unit height when no mass is set.
pub fn gaussian_pair(grid: &Grid, params: &ModelParams, seed: u64) -> (Field, Field, InitRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = grid.lower();
    let mid = grid.center();
    let ext = [grid.extent(0), grid.extent(1), grid.extent(2)];
    let mut cu = mid.0;
    cu[0] = lo.x() + ext[0] * (0.3 + rng.gen_range(-0.03..0.03));
    for axis in 1..grid.dim() {
        cu[axis] += ext[axis] * rng.gen_range(-0.05..0.05);
    }
    let width = ext[0] * (0.15 + rng.gen_range(-0.02..0.02));
    let mut cv = cu;
    cv[0] = 2.0 * mid.x() - cu[0];

    let centre = Point(cu);
    let bump = Field::from_fn_dirichlet(*grid, |p| (-(p.dist(&centre) / width).powi(2)).exp())
        .expect("gaussian values are finite");
    let u = normalize(bump.clone(), params.mass1);
    let nx = grid.counts()[0];
    let mirrored: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let [i, j, k] = grid.multi_index(idx);
            bump.get(grid.index(nx - 1 - i, j, k))
        })
        .collect();
    let v = normalize(Field::from_raw(*grid, mirrored), params.mass2);
    (u, v, InitRecord { seed, center_u: cu, center_v: cv, width })
}

fn normalize(f: Field, mass: Option<f64>) -> Field {
    match mass {
        Some(m) => {
            let n = f.l2_norm();
            f.scale(m.sqrt() / n)
        }
        None => {
            let top = f.max();
            f.scale(1.0 / top)
        }
    }
}
