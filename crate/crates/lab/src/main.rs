use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use seglab::audit::audit;
use seglab::config::{radii_range, SweepConfig};
use seglab::error::{LabError, LabResult};
use seglab::lemmas::{decay_check, gamma_sweep};
use seglab::persist::{load_solution, save_solution, write_json};
use seglab::report::regenerate;
use seglab::sweep::{run_sweep, write_frame};
use seglab_core::monotonicity::{
    acf_j, almgren_curve, estimate_c_const, log_h_identity_check, monotone_verdict, AcfVariant, AlmgrenVariant,
    BlowupScales,
};
use seglab_core::regularity::{blowup_rescale, holder_seminorm, rescaled_residual};
use seglab_core::solver::{gaussian_pair, solve_pair_with, Sources};
use seglab_core::Point;

#[derive(Parser)]
#[command(name = "seglab", version, about = "Competing Gross-Pitaevskii systems: sweeps and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pair and write u.gpsf, v.gpsf and solution.json.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Coupling; defaults to the first value of the schedule.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the β schedule of a config.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Start every row from the seeded initial pair.
        #[arg(long)]
        cold: bool,
    },
    /// Hölder seminorm of a persisted pair.
    Holder {
        solution: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Almgren frequency curve about a center.
    Almgren {
        solution: PathBuf,
        #[command(flatten)]
        curve: CurveArgs,
        /// Use the limiting-profile form (N = E/H + 1).
        #[arg(long)]
        limit_form: bool,
    },
    /// ACF functional about a center.
    Acf {
        solution: PathBuf,
        #[command(flatten)]
        curve: CurveArgs,
        /// Unweighted functional; needs disjoint supports.
        #[arg(long)]
        classic: bool,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
    },
    /// Blow-up frame around the seminorm-achieving pair.
    Blowup {
        solution: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4.0)]
        window: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// γ-inequality sweep and Helmholtz decay checks.
    VerifyLemmas {
        /// Masses M of the decay check.
        #[arg(long, value_delimiter = ',', default_values_t = [100.0, 1000.0, 10000.0])]
        masses: Vec<f64>,
    },
    /// Rewrite CSV/SVG from report.json, optionally auditing every row.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: bool,
        #[arg(long)]
        no_svg: bool,
    },
}

#[derive(Args)]
struct CurveArgs {
    /// `x,y` (or `x,y,z`).
    #[arg(long)]
    center: String,
    /// `rmin:rmax:n`.
    #[arg(long)]
    radii: String,
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
}

fn parse_center(s: &str) -> LabResult<Point> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| LabError::Config(format!("--center {s}: {e}")))?;
    match v.as_slice() {
        [x, y] => Ok(Point::new2(*x, *y)),
        [x, y, z] => Ok(Point::new3(*x, *y, *z)),
        _ => Err(LabError::Config(format!("--center needs 2 or 3 coordinates, got {s}"))),
    }
}

fn parse_radii(s: &str) -> LabResult<Vec<f64>> {
    let bad = || LabError::Config(format!("--radii expects rmin:rmax:n, got {s}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(bad());
    }
    Ok(radii_range(lo, hi, n))
}

fn load_config(path: &Option<PathBuf>) -> LabResult<SweepConfig> {
    match path {
        Some(p) => SweepConfig::load(p),
        None => Ok(SweepConfig::default()),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn run(cmd: Command) -> LabResult<()> {
    match cmd {
        Command::Solve { config, out, beta, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.sweep.seed = s;
            }
            let beta = match beta {
                Some(b) => b,
                None => cfg.beta_schedule()?[0],
            };
            let p = cfg.params(beta);
            p.validate().map_err(|e| LabError::Config(e.to_string()))?;
            let (u, v, init) = gaussian_pair(&cfg.grid()?, &p, cfg.sweep.seed);
            let sol = solve_pair_with(&p, (u, v), cfg.solver.tol, cfg.solver.max_iter, &cfg.solver_config(), &Sources::none())?;
            save_solution(&out, &sol, Some(init))?;
            println!(
                "beta = {beta}: residual {:e} after {} iterations, lambda = {}, mu = {}",
                sol.residual_l2, sol.iterations, sol.params.lambda, sol.params.mu
            );
            Ok(())
        }
        Command::Sweep { config, out, seed, cold } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.sweep.seed = s;
            }
            if cold {
                cfg.sweep.warm_start = false;
            }
            let out = out.unwrap_or_else(|| cfg.output.dir.clone());
            let report = run_sweep(&cfg, &out)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} rows, {} failed; reports in {}", report.rows.len(), report.failed_rows(), out.display());
            if report.is_failure() {
                return Err(LabError::SweepFailed { failed: report.failed_rows(), total: report.rows.len() });
            }
            Ok(())
        }
        Command::Holder { solution, alpha } => {
            let (sol, _) = load_solution(&solution)?;
            print_json(&holder_seminorm(&sol.u, Some(&sol.v), alpha)?);
            Ok(())
        }
        Command::Almgren { solution, curve, limit_form } => {
            let center = parse_center(&curve.center)?;
            let radii = parse_radii(&curve.radii)?;
            let (sol, _) = load_solution(&solution)?;
            let variant = if limit_form {
                AlmgrenVariant::LimitForm
            } else {
                AlmgrenVariant::BlowupForm(BlowupScales { r_beta: 1.0, m_beta: 1.0 })
            };
            let c = estimate_c_const(&sol.u, &sol.v, &sol.params, Some(center))?;
            let alm = almgren_curve(&sol.u, &sol.v, center, &radii, variant, &sol.params, c.c)?;
            let verdict = monotone_verdict(&alm.ntilde_values, &alm.radii, curve.tol)?;
            let identity = log_h_identity_check(&alm).ok();
            print_json(&serde_json::json!({ "curve": alm, "c_const": c, "verdict": verdict, "identity": identity }));
            verdict_exit(verdict.is_monotone, "perturbed frequency is not monotone")
        }
        Command::Acf { solution, curve, classic, epsilon } => {
            let center = parse_center(&curve.center)?;
            let radii = parse_radii(&curve.radii)?;
            let (sol, _) = load_solution(&solution)?;
            let (variant, coupling) = if classic {
                (AcfVariant::Classic, None)
            } else {
                let b = sol.params.beta;
                (AcfVariant::FWeighted, Some(sol.u.zip_map(&sol.v, |x, y| b * x * x * y * y)?))
            };
            let acf = acf_j(&sol.u, &sol.v, center, &radii, variant, epsilon, coupling.as_ref())?;
            let verdict = acf.verdict(curve.tol)?;
            print_json(&serde_json::json!({ "curve": acf, "verdict": verdict }));
            verdict_exit(verdict.is_monotone, "ACF functional is not monotone")
        }
        Command::Blowup { solution, alpha, window, out } => {
            let (sol, _) = load_solution(&solution)?;
            let rep = holder_seminorm(&sol.u, Some(&sol.v), alpha)?;
            let frame = blowup_rescale(&sol, &rep, window)?;
            let residual = rescaled_residual(&frame, &sol)?;
            write_frame(&out, &frame.u_bar, &frame.v_bar, &frame.meta)?;
            write_json(&out.join("residual.json"), &residual)?;
            print_json(&frame.meta);
            let h = frame.meta.rescaled_holder;
            verdict_exit((0.99..=1.01).contains(&h), &format!("rescaled seminorm {h} is not 1"))
        }
        Command::VerifyLemmas { masses } => {
            let gamma = gamma_sweep()?;
            let mut pass = gamma.pass;
            println!("gamma inequality: min excess {:e}: {}", gamma.min_excess, if gamma.pass { "PASS" } else { "FAIL" });
            for m in masses {
                let row = decay_check(m, 1.0, 0.5, 0.2, 0.1, 0.05)?;
                let ok = row.bound_pass && row.center_rel_err <= 0.02;
                pass &= ok;
                println!(
                    "decay M = {m}: |w| = {:e} <= {:e}, center rel. error {:.2e}: {}",
                    row.lhs,
                    row.bound,
                    row.center_rel_err,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            verdict_exit(pass, "lemma checks failed")
        }
        Command::Report { out, audit: do_audit, no_svg } => {
            let report = regenerate(&out, !no_svg)?;
            println!("{} rows rewritten in {}", report.rows.len(), out.display());
            if do_audit {
                let a = audit(&out, 1e-12)?;
                print_json(&a);
                return verdict_exit(a.pass, "audit found rows that do not reproduce");
            }
            Ok(())
        }
    }
}

fn verdict_exit(pass: bool, msg: &str) -> LabResult<()> {
    if pass {
        Ok(())
    } else {
        Err(LabError::Verdict(msg.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
