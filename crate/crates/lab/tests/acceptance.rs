//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the criteria execute sequentially
//! (runtime limits are part of several criteria) and every line is printed
//! whether or not it passes.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seglab::audit::audit;
use seglab::lemmas::{decay_check, gamma_splits};
use seglab::{run_sweep, SweepConfig};
use seglab_core::monotonicity::{
    acf_j, almgren_curve, gamma_inequality_check, log_h_identity_check, AcfVariant, AlmgrenVariant, BlowupScales,
};
use seglab_core::regularity::{holder_seminorm, node_distance_pow};
use seglab_core::solver::ModelParams;
use seglab_core::{ball_integral, sphere_integral, BallQuadrature, Field, Grid, Kernel, Point};

struct Outcome {
    pass: bool,
    detail: String,
    /// Criterion fails for a reason analysed as unattainable; `pass` then
    /// reports whether the measured values match the analytic prediction.
    known_gap: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, known_gap: None }
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let el = t.elapsed();
    let in_time = el <= limit;
    o.detail = format!("{}; {:.2} s (limit {} s)", o.detail, el.as_secs_f64(), limit.as_secs());
    o.pass &= in_time;
    o
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// 1. Ball and sphere integrals of quadratics against closed forms.
fn quadrature_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g2 = Grid::unit_square(256).unwrap();
    let g3 = Grid::cube(0.0, 1.0, 64).unwrap();
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (grid, dim) = if case < 14 { (g2, 2) } else { (g3, 3) };
        let r = rng.gen_range(0.1..0.3);
        let mut c = [0.0; 3];
        for x in c.iter_mut().take(dim) {
            *x = rng.gen_range(r + 0.01..1.0 - r - 0.01);
        }
        let center = Point(c);
        let a = rng.gen_range(1.0..2.0);
        let mut b = [0.0; 3];
        let mut q = [[0.0; 3]; 3];
        for i in 0..dim {
            b[i] = rng.gen_range(-1.0..1.0);
            for j in 0..=i {
                let v = rng.gen_range(-0.5..0.5);
                q[i][j] = v;
                q[j][i] = v;
            }
        }
        let poly = |p: Point| {
            let mut s = a;
            for i in 0..dim {
                s += b[i] * p.0[i];
                for j in 0..dim {
                    s += q[i][j] * p.0[i] * p.0[j];
                }
            }
            s
        };
        let f = Field::from_fn(grid, poly).unwrap();
        let trace: f64 = (0..dim).map(|i| q[i][i]).sum();
        let n = dim as f64;
        let (got, exact) = if case % 2 == 0 {
            let vol = if dim == 2 { PI * r * r } else { 4.0 / 3.0 * PI * r.powi(3) };
            let qd = BallQuadrature::with_defaults(&grid, center, r).unwrap();
            (ball_integral(&f, &qd, Kernel::One).unwrap(), vol * (poly(center) + trace * r * r / (n + 2.0)))
        } else {
            let area = if dim == 2 { 2.0 * PI * r } else { 4.0 * PI * r * r };
            let na = seglab_core::quadrature::default_n_angular(r, grid.h());
            (sphere_integral(&f, center, r, na).unwrap(), area * (poly(center) + trace * r * r / n))
        };
        worst = worst.max(rel(got, exact));
    }
    Outcome::new(worst <= 1e-4, format!("20 cases, worst relative error {worst:.2e} (tol 1e-4)"))
}

// 2. ACF functional of the two half-plane ramps.
fn acf_constancy() -> Outcome {
    let g = Grid::square(-0.5, 0.5, 256).unwrap();
    let h = g.h();
    let u = Field::from_fn(g, |p| p.x().max(0.0)).unwrap();
    let v = Field::from_fn(g, |p| (-p.x()).max(0.0)).unwrap();
    let radii: Vec<f64> = (0..10).map(|i| 8.0 * h + (0.25 - 8.0 * h) * i as f64 / 9.0).collect();
    let curve = acf_j(&u, &v, Point::new2(0.0, 0.0), &radii, AcfVariant::Classic, 0.0, None).unwrap();
    let target = PI * PI / 4.0;
    let worst = curve.j_values.iter().map(|&j| rel(j, target)).fold(0.0, f64::max);
    let verdict = curve.verdict(1e-3).unwrap();
    Outcome::new(
        worst <= 1e-2 && verdict.is_monotone,
        format!("max |J/(pi^2/4) - 1| = {worst:.2e} (tol 1e-2), monotone = {}", verdict.is_monotone),
    )
}

// 3. Frequency of r^α max(cos θ, 0).
fn almgren_homogeneity() -> Outcome {
    let g = Grid::square(-0.5, 0.5, 256).unwrap();
    let h = g.h();
    let radii: Vec<f64> = (0..10).map(|i| 8.0 * h + (0.2 - 8.0 * h) * i as f64 / 9.0).collect();
    let p = ModelParams { beta: 0.0, omega1: 0.0, omega2: 0.0, lambda: 0.0, mu: 0.0, mass1: None, mass2: None };
    let zero = Field::zeros(g);
    let mut stated = true;
    let mut matches_analysis = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let u = Field::from_fn(g, |q| {
            let r = q.norm();
            if r == 0.0 {
                0.0
            } else {
                r.powf(alpha) * (q.x() / r).max(0.0)
            }
        })
        .unwrap();
        let variant = AlmgrenVariant::BlowupForm(BlowupScales { r_beta: 1.0, m_beta: 1.0 });
        let curve = almgren_curve(&u, &zero, Point::new2(0.0, 0.0), &radii, variant, &p, 0.0).unwrap();
        let dev_alpha = curve.n_values.iter().map(|n| (n - alpha).abs()).fold(0.0, f64::max);
        let identity = log_h_identity_check(&curve).unwrap();
        // ∫|∇u|² over the half disc against the boundary mass gives
        // N = (α² + 1) / (2α) for every radius; equal to α only at α = 1.
        let predicted = (alpha * alpha + 1.0) / (2.0 * alpha);
        let dev_pred = curve.n_values.iter().map(|n| rel(*n, predicted)).fold(0.0, f64::max);
        stated &= dev_alpha <= 1e-2 && identity.passes(5e-2);
        // the r^(1/2) singularity at the center costs a few percent at 8h
        matches_analysis &= dev_pred <= 5e-2;
        parts.push(format!(
            "alpha {alpha}: max|N - alpha| = {dev_alpha:.2e}, max|N/((a^2+1)/(2a)) - 1| = {dev_pred:.2e}, identity dev {:.2e}",
            identity.max_rel_deviation
        ));
    }
    let mut o = Outcome::new(stated, parts.join("; "));
    if !stated {
        o.known_gap = Some(
            "N of r^a max(cos t, 0) is (a^2+1)/(2a), not a, for a != 1 (the function is not harmonic)".into(),
        );
        o.pass = matches_analysis;
    }
    o
}

// 4. γ inequality on complementary arcs.
fn gamma_sweep_check() -> Outcome {
    let mut worst_oracle: f64 = 0.0;
    let mut min_excess = f64::INFINITY;
    let mut equality_only_at_half = true;
    let splits = gamma_splits();
    for &t in &splits {
        let (l1, l2) = (2.0 * PI * t, 2.0 * PI * (1.0 - t));
        let got = gamma_inequality_check((PI / l1).powi(2), (PI / l2).powi(2), 2).unwrap();
        // in the plane γ(x) = √x, so the excess is 1/(2t) + 1/(2(1-t)) - 2
        let oracle = 1.0 / (2.0 * t) + 1.0 / (2.0 * (1.0 - t)) - 2.0;
        worst_oracle = worst_oracle.max((got - oracle).abs());
        min_excess = min_excess.min(got);
        let half = (t - 0.5).abs() < 1e-12;
        equality_only_at_half &= if half { got.abs() <= 1e-12 } else { got > 1e-12 };
    }
    Outcome::new(
        splits.len() == 20 && min_excess >= -1e-12 && equality_only_at_half && worst_oracle < 1e-12,
        format!(
            "{} splits, min excess {min_excess:.2e}, equality only at half = {equality_only_at_half}, oracle dev {worst_oracle:.1e}",
            splits.len()
        ),
    )
}

/// ψ(0) for `ψ'' + ψ'/ρ = Mψ`, `ψ(R) = 1`, by RK4 on the profile with
/// φ(0) = 1.
fn radial_center(m: f64, r: f64) -> f64 {
    let r0 = 1e-6;
    let mut y = [1.0 + m * r0 * r0 / 4.0, m * r0 / 2.0];
    let f = |t: f64, y: [f64; 2]| [y[1], m * y[0] - y[1] / t];
    let steps = 400_000;
    let dt = (r - r0) / steps as f64;
    let mut t = r0;
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + dt / 2.0, [y[0] + dt / 2.0 * k1[0], y[1] + dt / 2.0 * k1[1]]);
        let k3 = f(t + dt / 2.0, [y[0] + dt / 2.0 * k2[0], y[1] + dt / 2.0 * k2[1]]);
        let k4 = f(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        for i in 0..2 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
    }
    1.0 / y[0]
}

// 5. Exponential decay of Helmholtz solutions.
fn decay_lemma() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [1e2, 1e3, 1e4] {
        let row = decay_check(m, 1.0, 0.5, 0.2, 0.1, 0.05).unwrap();
        let oracle = radial_center(m, 0.5);
        let err = rel(row.center_value, oracle);
        pass &= row.bound_pass && err <= 0.02;
        parts.push(format!("M {m:.0e}: {:.2e} <= {:.2e}, center err {err:.2e}", row.lhs, row.bound));
    }
    Outcome::new(pass, parts.join("; "))
}

fn sweep_config(cells: usize, betas: &[f64]) -> SweepConfig {
    let mut cfg = SweepConfig::default();
    cfg.grid.cells = cells;
    cfg.sweep.betas = betas.to_vec();
    cfg.sweep.alphas = vec![0.5, 1.0];
    cfg
}

struct SweepOutcomes {
    c6: Outcome,
    c7: Outcome,
    c8: Outcome,
}

// 6-8. Warm-started sweep on the unit square.
fn sweep_trends(out: &Path) -> SweepOutcomes {
    let cfg = sweep_config(128, &[10.0, 100.0, 1000.0, 10000.0]);
    let t = Instant::now();
    let report = run_sweep(&cfg, out).unwrap();
    let elapsed = t.elapsed();
    let rows: Vec<_> = report.rows.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let all_ok = rows.len() == 4;

    let seg: Vec<f64> = rows.iter().map(|m| m.segregation).collect();
    let decreasing = seg.windows(2).all(|w| w[1] < w[0]);
    let ratio = seg.last().copied().unwrap_or(f64::NAN) / seg.first().copied().unwrap_or(f64::NAN);
    let c6 = Outcome::new(
        all_ok && decreasing && ratio < 0.2 && elapsed <= Duration::from_secs(300),
        format!("segregation {seg:.4?}, last/first = {ratio:.3}; {:.1} s (limit 300 s)", elapsed.as_secs_f64()),
    );

    let l05: Vec<f64> = rows.iter().map(|m| m.holder[0].l).collect();
    let lip: Vec<f64> = rows.iter().map(|m| m.lipschitz).collect();
    let spread = l05.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / l05.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = lip.len();
    let last_ratio = if n >= 2 { lip[n - 1] / lip[n - 2] } else { f64::NAN };
    let c7 = Outcome::new(
        all_ok && spread < 2.0 && lip[n - 1].is_finite() && (0.5..=2.0).contains(&last_ratio),
        format!("L_0.5 {l05:.3?} (max/min {spread:.3}); Lipschitz {lip:.3?} (last/previous {last_ratio:.3})"),
    );

    let holders: Vec<f64> = report.blowups.iter().map(|b| b.meta.rescaled_holder).collect();
    let bm: Vec<f64> = report.blowups.iter().map(|b| b.meta.beta_m_beta).collect();
    let c8 = Outcome::new(
        holders.len() == 3 && holders.iter().all(|h| (0.99..=1.01).contains(h)) && bm.windows(2).all(|w| w[1] > w[0]),
        format!("rescaled seminorms {holders:.6?}; beta*M_beta {bm:.4?}"),
    );
    SweepOutcomes { c6, c7, c8 }
}

/// Exhaustive search over node pairs of a planar grid. Distance powers are
/// cached per offset; each entry is the library's value for that offset.
fn brute_force(f: &Field, alpha: f64) -> (f64, usize, usize) {
    let grid = f.grid();
    let [nx, ny, _] = grid.counts();
    let table: Vec<f64> =
        (0..nx * ny).map(|k| if k == 0 { 0.0 } else { node_distance_pow(grid, 0, grid.index(k % nx, k / nx, 0), alpha) }).collect();
    let v = f.values();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for a in 0..grid.len() {
        let (ai, aj) = (a % nx, a / nx);
        for b in a + 1..grid.len() {
            let (bi, bj) = (b % nx, b / nx);
            let q = (v[a] - v[b]).abs() / table[ai.abs_diff(bi) + nx * aj.abs_diff(bj)];
            if q > best.0 {
                best = (q, a, b);
            }
        }
    }
    best
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_values(grid, (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

// 9. Pruned search against brute force.
fn seminorm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g64 = Grid::new(&[64, 64], 1.0 / 63.0, &[0.0, 0.0]).unwrap();
    let mut identical = 0;
    for i in 0..30 {
        let f = random_field(g64, &mut rng);
        let alpha = [0.25, 0.5, 0.75, 1.0][i % 4];
        let rep = holder_seminorm(&f, None, alpha).unwrap();
        let (q, a, b) = brute_force(&f, alpha);
        if (rep.l.to_bits(), rep.x_index, rep.y_index) == (q.to_bits(), a, b) {
            identical += 1;
        }
    }
    let g256 = Grid::new(&[256, 256], 1.0 / 255.0, &[0.0, 0.0]).unwrap();
    let f = random_field(g256, &mut rng);
    let t = Instant::now();
    let pruned = holder_seminorm(&f, None, 0.5).unwrap();
    let tp = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let brute = brute_force(&f, 0.5);
    let tb = t.elapsed().as_secs_f64();
    let same = pruned.l.to_bits() == brute.0.to_bits();
    let speedup = tb / tp;
    Outcome::new(
        identical == 30 && same && speedup >= 10.0,
        format!("{identical}/30 bit-identical; 256^2: pruned {tp:.3} s, brute {tb:.2} s, speedup {speedup:.0}x"),
    )
}

fn same_bytes(a: &Path, b: &Path, files: &[String]) -> bool {
    files.iter().all(|f| match (fs::read(a.join(f)), fs::read(b.join(f))) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    })
}

// 10. Byte-identical reruns and row audits.
fn determinism(first_sweep: &Path, scratch: &Path) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for warm in [true, false] {
        let mut cfg = sweep_config(32, &[10.0, 100.0, 1000.0]);
        cfg.sweep.warm_start = warm;
        let (a, b) = (scratch.join(format!("a_{warm}")), scratch.join(format!("b_{warm}")));
        let ra = run_sweep(&cfg, &a).unwrap();
        let rb = run_sweep(&cfg, &b).unwrap();
        let same = ra.manifest == rb.manifest && same_bytes(&a, &b, &ra.manifest);
        let audit_a = audit(&a, 1e-12).unwrap();
        pass &= same && audit_a.pass;
        parts.push(format!(
            "{} start: {} files identical = {same}, audit pass = {}",
            if warm { "warm" } else { "cold" },
            ra.manifest.len(),
            audit_a.pass
        ));
    }
    let big = audit(first_sweep, 1e-12).unwrap();
    let worst = big.rows.iter().map(|r| r.max_rel_deviation).fold(0.0, f64::max);
    pass &= big.pass;
    parts.push(format!("128^2 sweep audit pass = {}, worst deviation {worst:.1e}", big.pass));
    Outcome::new(pass, parts.join("; "))
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; listing
    // requests get an empty answer.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let scratch = tempfile::tempdir().expect("temporary directory");
    let sweep_dir = scratch.path().join("sweep");

    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        let verdict = match (&o.known_gap, o.pass) {
            (None, true) => "PASS",
            (None, false) => "FAIL",
            (Some(_), _) => "FAIL",
        };
        println!("criterion {n:>2}: {verdict}: {}", o.detail);
        if let Some(gap) = &o.known_gap {
            let m = if o.pass { "agrees" } else { "does NOT agree" };
            println!("              unattainable as stated: {gap}; the measured N {m} with that value");
        }
        results.push((n, o));
    };

    report(1, timed(Duration::from_secs(5), quadrature_oracles));
    report(2, timed(Duration::from_secs(10), acf_constancy));
    report(3, timed(Duration::from_secs(10), almgren_homogeneity));
    report(4, timed(Duration::from_secs(1), gamma_sweep_check));
    report(5, timed(Duration::from_secs(30), decay_lemma));
    let s = sweep_trends(&sweep_dir);
    report(6, s.c6);
    report(7, s.c7);
    report(8, s.c8);
    report(9, seminorm_equivalence());
    report(10, determinism(&sweep_dir, scratch.path()));

    let unexpected: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
