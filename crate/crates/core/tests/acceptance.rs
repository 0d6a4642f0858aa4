//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs sequentially so the reported runtimes are not inflated by other tests.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mmse_uplink::asymptotics::{
    beta_closed_form, correction_bound, edf_fixed_point, limiting_edf, second_term, solve_beta, AsymptoticParams,
};
use mmse_uplink::channel::{covariance_from_columns, mmse_sir, ChannelVector};
use mmse_uplink::cli::Theory;
use mmse_uplink::config::ScenarioConfig;
use mmse_uplink::montecarlo::{empirical_edf, run_experiment, trial_rng, try_ks_distance, ExperimentSummary, Scenario};
use mmse_uplink::powerctl::{power_distribution, PowerBounds, PowerDistribution};
use mmse_uplink::{PowerPolicy, ScenarioParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(ok: bool, label: String, out: &mut Vec<String>) -> bool {
    out.push(format!("{label} {}", if ok { "ok" } else { "MISS" }));
    ok
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn preset(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn params_for(cfg: &ScenarioConfig, n: usize) -> ScenarioParams {
    cfg.scenarios()
        .into_iter()
        .find(|p| p.n_antennas == n)
        .unwrap_or_else(|| panic!("no scenario with N = {n}"))
}

fn simulate(cfg: &ScenarioConfig, params: &ScenarioParams) -> ExperimentSummary {
    let sc = Scenario::new(params.clone()).unwrap();
    run_experiment(&sc, cfg.trials, cfg.seed, workers()).unwrap()
}

fn within(elapsed: Duration, limit_s: f64, out: &mut Vec<String>) -> bool {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("runtime {:.1}s < {limit_s}s", elapsed.as_secs_f64()),
        out,
    )
}

fn finish(checks: Vec<bool>, notes: Vec<String>) -> Outcome {
    Outcome {
        pass: checks.iter().all(|&b| b),
        detail: notes.join("; "),
    }
}

/// Trials from every simulated reference configuration, for the eigenvalue diagnostic.
#[derive(Default)]
struct Pool {
    trials: usize,
    positive_min_eig: usize,
}

impl Pool {
    fn add(&mut self, s: &ExperimentSummary) {
        self.trials += s.trials.len();
        self.positive_min_eig += s.trials.iter().filter(|t| t.min_eig.is_some_and(|e| e > 0.0)).count();
    }
}

fn closed_form_consistency() -> Outcome {
    let start = Instant::now();
    let target = 4.0 / PI.powi(4);
    let dist = PowerDistribution::point_mass(1.0, 1.0);
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    for c in [f64::INFINITY, 1e20] {
        let ap = AsymptoticParams::new(4.0, 1.0, c).unwrap();
        let beta = solve_beta(&ap, &dist).unwrap().beta;
        let rel = (beta - target).abs() / target;
        checks.push(check(
            rel <= 1e-8,
            format!("c={c:e}: rel err {rel:.2e} <= 1e-8"),
            &mut notes,
        ));
    }
    checks.push(within(start.elapsed(), 1.0, &mut notes));
    finish(checks, notes)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let policies = [
        PowerPolicy::Constant { power: 1.0 },
        PowerPolicy::TwoLevel {
            p_low: 0.5,
            p_high: 1.0,
        },
        PowerPolicy::Fractional {
            epsilon: 0.5,
            d_min: 1.0,
        },
    ];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for alpha in [3.0, 4.0, 6.0] {
        for c in [2.0, 10.0, 100.0] {
            for policy in policies {
                // Every potential mobile is active: rho_c = rho_m / K.
                let params = ScenarioParams {
                    alpha,
                    rho_m: 1.0,
                    rho_c: 0.1,
                    k: 10,
                    ..ScenarioParams::reference(policy, 8)
                };
                let dist = power_distribution(&params).unwrap();
                let ap = AsymptoticParams::new(alpha, 1.0, c).unwrap();
                let root = solve_beta(&ap, &dist).map(|s| s.beta);
                let oracle = limiting_edf(&ap, &dist).and_then(|h| edf_fixed_point(&h, c));
                match (root, oracle) {
                    (Ok(a), Ok(b)) => {
                        let rel = (a - b).abs() / b;
                        worst = worst.max(rel);
                        if rel > 1e-6 {
                            failures.push(format!("{} a={alpha} c={c}: {a} vs {b}", policy.label()));
                        }
                    }
                    (a, b) => failures.push(format!("{} a={alpha} c={c}: {a:?} / {b:?}", policy.label())),
                }
            }
        }
    }
    let mut notes = vec![];
    let mut checks = vec![check(
        failures.is_empty(),
        format!("27 cases, worst rel diff {worst:.2e} <= 1e-6"),
        &mut notes,
    )];
    notes.extend(failures);
    checks.push(within(start.elapsed(), 60.0, &mut notes));
    finish(checks, notes)
}

fn edf_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = preset("edf_unit_power.json");
    let mut notes = Vec::new();
    let mut ks = Vec::new();
    for p in cfg.scenarios() {
        let sc = Scenario::new(p.clone()).unwrap();
        let sample = empirical_edf(&sc, cfg.seed).unwrap();
        let ap = AsymptoticParams::from_scenario(&p).unwrap();
        let h = limiting_edf(&ap, &power_distribution(&p).unwrap()).unwrap();
        use mmse_uplink::asymptotics::DistributionFunction;
        let d = try_ks_distance(|x| h.cdf(x), &h.knots(), &sample).unwrap();
        notes.push(format!("n={} K-S {d:.4}", p.n_mobiles()));
        ks.push(d);
    }
    let mut checks = vec![
        check(
            ks.last().is_some_and(|&d| d <= 0.02),
            "largest n <= 0.02".into(),
            &mut notes,
        ),
        check(ks.windows(2).all(|w| w[1] < w[0]), "decreasing in n".into(), &mut notes),
    ];
    checks.push(within(start.elapsed(), 60.0, &mut notes));
    finish(checks, notes)
}

fn rejection_ok(label: &str, s: &ExperimentSummary, notes: &mut Vec<String>) -> bool {
    check(
        s.rejection_rate() < 1e-3,
        format!("{label} rejection {}/{}", s.rejected, s.trials.len()),
        notes,
    )
}

fn path_loss_inversion(pool: &mut Pool) -> Outcome {
    let start = Instant::now();
    let cfg = preset("path_loss_inversion.json");
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    let mut stds = Vec::new();
    for n in cfg.antennas() {
        let p = params_for(&cfg, n);
        let s = simulate(&cfg, &p);
        pool.add(&s);
        let theory = Theory::new(&p).unwrap();
        let rel = (s.se.mean - theory.mean_se).abs() / theory.mean_se;
        notes.push(format!(
            "N={n}: mean {:.4} vs {:.4} (rel {rel:.4}), std {:.4}",
            s.se.mean, theory.mean_se, s.se.std
        ));
        match n {
            64 => checks.push(check(rel <= 0.03, format!("N=64 rel {rel:.4} <= 0.03"), &mut notes)),
            8 => checks.push(check(rel <= 0.08, format!("N=8 rel {rel:.4} <= 0.08"), &mut notes)),
            _ => {}
        }
        checks.push(rejection_ok(&format!("N={n}"), &s, &mut notes));
        stds.push(s.se.std);
    }
    checks.push(check(
        stds.windows(2).all(|w| w[1] <= w[0]),
        "std nonincreasing in N".into(),
        &mut notes,
    ));
    checks.push(within(start.elapsed(), 600.0, &mut notes));
    finish(checks, notes)
}

fn fractional_ks(pool: &mut Pool) -> Outcome {
    let start = Instant::now();
    let cfg = preset("fractional.json");
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    let mut ks = Vec::new();
    for n in [128, 8] {
        let p = params_for(&cfg, n);
        let s = simulate(&cfg, &p);
        pool.add(&s);
        let d = Theory::new(&p).unwrap().ks_to(&s.se_ecdf);
        notes.push(format!("N={n} K-S {d:.4}"));
        checks.push(rejection_ok(&format!("N={n}"), &s, &mut notes));
        ks.push(d);
    }
    checks.push(check(ks[0] <= 0.05, "N=128 <= 0.05".into(), &mut notes));
    checks.push(check(ks[1] > ks[0], "N=8 larger".into(), &mut notes));
    checks.push(within(start.elapsed(), 900.0, &mut notes));
    finish(checks, notes)
}

fn two_level_ks(pool: &mut Pool) -> Outcome {
    let start = Instant::now();
    let cfg = preset("two_level.json");
    let p = params_for(&cfg, 64);
    let s = simulate(&cfg, &p);
    pool.add(&s);
    let d = Theory::new(&p).unwrap().ks_to(&s.se_ecdf);
    let mut notes = Vec::new();
    let checks = vec![
        check(d <= 0.07, format!("N=64 K-S {d:.4} <= 0.07"), &mut notes),
        rejection_ok("N=64", &s, &mut notes),
        within(start.elapsed(), 600.0, &mut notes),
    ];
    finish(checks, notes)
}

fn epsilon_quantiles() -> Outcome {
    let start = Instant::now();
    let cfg = preset("fractional_eps_grid.json");
    let mut notes = Vec::new();
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for p in cfg.scenarios() {
        let eps = p.policy.epsilon().unwrap();
        let q = Theory::new(&p).unwrap().se_q05;
        notes.push(format!("eps={eps}: q05 {q:.4}"));
        if q > best.0 {
            best = (q, eps);
        }
    }
    let checks = vec![
        check(best.1 == 1.0, format!("argmax eps = {}", best.1), &mut notes),
        within(start.elapsed(), 10.0, &mut notes),
    ];
    finish(checks, notes)
}

fn correction_bound_dominates() -> Outcome {
    let start = Instant::now();
    let mut rng = trial_rng(2024, 0);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..100 {
        let alpha = rng.random_range(2.2..6.0);
        let c = 10f64.powf(rng.random_range(0.5..5.0));
        let policy = match rng.random_range(0..4) {
            0 => PowerPolicy::Constant {
                power: rng.random_range(0.1..10.0),
            },
            1 => {
                let lo = rng.random_range(0.1..1.0);
                PowerPolicy::TwoLevel {
                    p_low: lo,
                    p_high: lo * rng.random_range(1.0..4.0),
                }
            }
            2 => PowerPolicy::Fractional {
                epsilon: rng.random_range(0.0..=1.0),
                d_min: 1.0,
            },
            _ => PowerPolicy::PathLossInversion { d_min: 1.0 },
        };
        let params = ScenarioParams {
            alpha,
            rho_c: 0.1,
            ..ScenarioParams::reference(policy, 8)
        };
        let dist = power_distribution(&params).unwrap();
        let ap = AsymptoticParams::new(alpha, 1.0, c).unwrap();
        let beta = beta_closed_form(&ap, &dist).unwrap().beta * 10f64.powf(rng.random_range(-2.0..2.0));
        let p_max = PowerBounds::resolve(&params).unwrap().p_max;
        let second = second_term(beta, &ap, &dist).unwrap();
        let bound = correction_bound(beta, &ap, p_max).unwrap();
        // Constant power has P = P_M almost surely, where bound and term
        // coincide; allow a few ulps of rounding there.
        if bound < second * (1.0 - 4.0 * f64::EPSILON) {
            violations += 1;
        }
        if second > 0.0 {
            min_ratio = min_ratio.min(bound / second);
        }
    }
    let mut notes = Vec::new();
    let checks = vec![
        check(
            violations == 0,
            format!(
                "100 tuples, {violations} violations, min bound/term - 1 = {:.1e}",
                min_ratio - 1.0
            ),
            &mut notes,
        ),
        within(start.elapsed(), 10.0, &mut notes),
    ];
    finish(checks, notes)
}

fn cn01<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar unitary from the QR factorisation of a complex Gaussian matrix.
fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| cn01(rng));
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
        let d = r[(i, i)];
        d / d.norm()
    }));
    q * phases
}

fn linear_algebra(pool: &Pool) -> Outcome {
    let mut rng = trial_rng(7, 0);
    let alpha = 4.0;
    let (mut worst_inv, mut worst_rot) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=48);
        let m = rng.random_range(n..=3 * n);
        let a = DMatrix::from_fn(n, m, |_, _| cn01(&mut rng) * rng.random_range(0.01f64..10.0).sqrt());
        let g0 = ChannelVector(DVector::from_fn(n, |_, _| cn01(&mut rng)));
        let (p0, r0) = (rng.random_range(0.5..2.0), rng.random_range(1.0..50.0));
        let cov = covariance_from_columns(&a);
        let out = mmse_sir(&g0, &cov, p0, r0, alpha).unwrap();

        let inv = cov.matrix.clone().try_inverse().unwrap();
        let qf = (g0.0.adjoint() * &inv * &g0.0)[(0, 0)].re;
        let oracle = p0 * r0.powf(-alpha) * qf;
        worst_inv = worst_inv.max((out.sir - oracle).abs() / oracle);

        let u = random_unitary(n, &mut rng);
        let rotated = mmse_sir(
            &ChannelVector(&u * &g0.0),
            &covariance_from_columns(&(&u * &a)),
            p0,
            r0,
            alpha,
        )
        .unwrap();
        worst_rot = worst_rot.max((rotated.sir - out.sir).abs() / out.sir);
    }
    let share = pool.positive_min_eig as f64 / pool.trials.max(1) as f64;
    let mut notes = Vec::new();
    let checks = vec![
        check(
            worst_inv <= 1e-9,
            format!("explicit inverse worst rel {worst_inv:.2e}"),
            &mut notes,
        ),
        check(
            worst_rot <= 1e-9,
            format!("unitary rotation worst rel {worst_rot:.2e}"),
            &mut notes,
        ),
        check(
            pool.trials > 0 && share >= 0.999,
            format!(
                "min eig > 0 in {}/{} simulated trials",
                pool.positive_min_eig, pool.trials
            ),
            &mut notes,
        ),
    ];
    finish(checks, notes)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("mmse-uplink-acceptance-{}", std::process::id()));
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    let runs: [(&str, &str, &[&str]); 4] = [
        ("simulate", "path_loss_inversion.json", &["--trials", "200"]),
        ("compare", "two_level.json", &["--trials", "200"]),
        ("solve", "fractional_eps_grid.json", &[]),
        ("edf", "edf_unit_power.json", &[]),
    ];
    for (sub, file, extra) in runs {
        let outputs: Vec<PathBuf> = ["1", "8"]
            .iter()
            .map(|w| {
                let out = root.join(format!("{sub}-{w}"));
                let status = Command::new(env!("CARGO_BIN_EXE_mmse-uplink"))
                    .arg(sub)
                    .arg("--config")
                    .arg(presets.join(file))
                    .arg("--out")
                    .arg(&out)
                    .args(["--workers", w])
                    .args(extra)
                    .stderr(std::process::Stdio::null())
                    .status()
                    .unwrap();
                assert!(status.success(), "{sub} {file} failed");
                out
            })
            .collect();
        let (a, b) = (read_dir_sorted(&outputs[0]), read_dir_sorted(&outputs[1]));
        let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
        checks.push(check(
            !a.is_empty() && a == b,
            format!("{sub} {} identical", names.join("+")),
            &mut notes,
        ));
    }
    let _ = std::fs::remove_dir_all(&root);
    finish(checks, notes)
}

fn main() {
    let mut pool = Pool::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Pool) -> Outcome>)> = vec![
        ("closed-form consistency", Box::new(|_| closed_form_consistency())),
        ("fixed point vs e.d.f. oracle", Box::new(|_| oracle_equivalence())),
        ("e.d.f. convergence", Box::new(|_| edf_convergence())),
        ("path-loss inversion mean and spread", Box::new(path_loss_inversion)),
        ("fractional control SE distribution", Box::new(fractional_ks)),
        ("two-level control SE distribution", Box::new(two_level_ks)),
        ("5% quantile across epsilon", Box::new(|_| epsilon_quantiles())),
        ("correction bound", Box::new(|_| correction_bound_dominates())),
        ("linear-algebra invariants", Box::new(|p| linear_algebra(p))),
        ("determinism across workers", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run(&mut pool);
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<38} {} ({:.1}s) {}",
            i + 1,
            name,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
