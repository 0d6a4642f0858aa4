//! Command-line driver: `simulate`, `solve`, `edf` and `compare`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::{
    beta_closed_form, correction_bound, fixed_point_residual, limiting_edf, limiting_edf_variant, second_term,
    solve_beta, AsymptoticParams, DistributionFunction, EdfVariant, SeApproximation,
};
use crate::config::{Reconciled, ScenarioConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{
    empirical_edf, ks_distance, run_experiment, try_ks_distance, EmpiricalCdf, ExperimentSummary, Scenario,
};
use crate::params::ScenarioParams;
use crate::powerctl::{power_distribution, representative_q_cdf, PowerPolicy, QDistribution};

#[derive(Debug, Parser)]
#[command(
    name = "mmse-uplink",
    version,
    about = "Monte Carlo and large-system analysis of uplink MMSE spectral efficiency"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Monte Carlo trials; writes trials.csv and summary.json.
    Simulate(RunArgs),
    /// Solve the large-system limit; writes solve.json, se_table.csv and se_cdf.csv.
    Solve(RunArgs),
    /// Compare the empirical and limiting e.d.f. of received powers; writes edf.csv and edf.json.
    Edf(RunArgs),
    /// Simulate and solve, then report deviations; writes compare.json and compare_cdf.csv.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the number of trials in the config.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Overrides the master seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    /// Points in the gamma / x grids of the tabulated CDFs.
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// 0 on success, 2 for numerical failures, 1 for everything else.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 2,
        Err(_) => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Solve(a) => solve(&a),
        Command::Edf(a) => edf(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn load(args: &RunArgs) -> Result<ScenarioConfig> {
    if args.grid_points < 2 {
        return Err(Error::Config {
            context: "--grid-points".into(),
            message: "must be at least 2".into(),
        });
    }
    if args.workers == 0 {
        return Err(Error::Config {
            context: "--workers".into(),
            message: "must be at least 1".into(),
        });
    }
    ScenarioConfig::from_path(&args.config)?.with_overrides(args.trials, args.seed)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config {
        context: name.to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write(dir, name, &text)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn column_label(params: &ScenarioParams) -> String {
    format!("{}_N{}", params.policy.label(), params.n_antennas)
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    config: &'a ScenarioConfig,
    reconciled: Vec<Reconciled>,
    results: Vec<T>,
}

fn envelope<T>(cfg: &ScenarioConfig, results: Vec<T>) -> Envelope<'_, T> {
    Envelope {
        config: cfg,
        reconciled: cfg.reconciled(),
        results,
    }
}

fn scenario(params: ScenarioParams) -> Result<Scenario> {
    let sc = Scenario::new(params)?;
    for w in sc.warnings() {
        eprintln!("warning: {}: {w}", column_label(&sc.params));
    }
    Ok(sc)
}

fn experiment(cfg: &ScenarioConfig, params: &ScenarioParams, workers: usize) -> Result<ExperimentSummary> {
    let sc = scenario(params.clone())?;
    eprintln!("simulating {} ({} trials)", column_label(params), cfg.trials);
    run_experiment(&sc, cfg.trials, cfg.seed, workers)
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    policy: String,
    policy_spec: PowerPolicy,
    #[serde(rename = "N")]
    n_antennas: usize,
    n: usize,
    c: f64,
    disk_radius: f64,
    seed: u64,
    trials: usize,
    rejected: usize,
    mean_se: f64,
    std_se: f64,
    mean_beta_n: f64,
    std_beta_n: f64,
    se_ecdf: &'a [f64],
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let mut csv = String::from("policy,N,trial,sir,se,beta_n,actives,min_eig,rejected\n");
    let scenarios = cfg.scenarios();
    let mut summaries = Vec::new();
    for p in &scenarios {
        let s = experiment(&cfg, p, args.workers)?;
        for t in &s.trials {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                p.policy.label(),
                p.n_antennas,
                t.trial,
                opt(t.sir),
                opt(t.se),
                opt(t.beta_n),
                t.actives,
                opt(t.min_eig),
                t.rejected
            );
        }
        summaries.push(s);
    }
    let reports: Vec<ExperimentReport> = scenarios
        .iter()
        .zip(&summaries)
        .map(|(p, s)| ExperimentReport {
            policy: p.policy.label(),
            policy_spec: p.policy,
            n_antennas: p.n_antennas,
            n: p.n_mobiles(),
            c: p.c(),
            disk_radius: p.disk_radius,
            seed: s.seed,
            trials: s.trials.len(),
            rejected: s.rejected,
            mean_se: s.se.mean,
            std_se: s.se.std,
            mean_beta_n: s.beta_n.mean,
            std_beta_n: s.beta_n.std,
            se_ecdf: s.se_ecdf.samples(),
        })
        .collect();
    write(&args.out, "trials.csv", &csv)?;
    write_json(&args.out, "summary.json", &envelope(&cfg, reports))
}

/// Asymptotic quantities for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Theory {
    pub policy: String,
    #[serde(rename = "N")]
    pub n_antennas: usize,
    pub c: f64,
    pub moment: f64,
    pub p_max: f64,
    pub beta_fixed: f64,
    pub beta_closed: f64,
    pub residual_at_fixed: f64,
    pub second_term: f64,
    pub correction_bound: f64,
    pub mean_se: f64,
    pub se_q05: f64,
    pub se_median: f64,
    #[serde(skip)]
    pub approx: SeApproximation,
    #[serde(skip)]
    pub fq: QDistribution,
}

impl Theory {
    pub fn new(params: &ScenarioParams) -> Result<Self> {
        params.validate()?;
        let dist = power_distribution(params)?;
        let ap = AsymptoticParams::from_scenario(params)?;
        let fixed = solve_beta(&ap, &dist)?;
        let closed = beta_closed_form(&ap, &dist)?;
        let bounds = crate::powerctl::PowerBounds::resolve(params)?;
        let approx = SeApproximation::new(params.n_antennas, &ap, &dist)?;
        let fq = representative_q_cdf(params)?;
        Ok(Theory {
            policy: params.policy.label(),
            n_antennas: params.n_antennas,
            c: ap.c,
            moment: closed.moment,
            p_max: bounds.p_max,
            beta_fixed: fixed.beta,
            beta_closed: closed.beta,
            residual_at_fixed: fixed_point_residual(fixed.beta, &ap, &dist)?,
            second_term: second_term(fixed.beta, &ap, &dist)?,
            correction_bound: correction_bound(fixed.beta, &ap, bounds.p_max)?,
            mean_se: approx.mean(&fq)?,
            se_q05: approx.quantile(0.05, &fq),
            se_median: approx.quantile(0.5, &fq),
            approx,
            fq,
        })
    }

    pub fn se_cdf(&self, gamma: f64) -> f64 {
        self.approx.cdf(gamma, &self.fq)
    }

    /// Spectral efficiencies where the approximate CDF may jump.
    pub fn se_knots(&self) -> Vec<f64> {
        self.fq.breakpoints().iter().map(|&q| self.approx.se(q)).collect()
    }

    pub fn ks_to(&self, sample: &EmpiricalCdf) -> f64 {
        ks_distance(|g| self.se_cdf(g), &self.se_knots(), sample)
    }
}

fn gamma_grid(theories: &[Theory], extra_max: f64, points: usize) -> Vec<f64> {
    let top = theories
        .iter()
        .map(|t| t.approx.quantile(0.999, &t.fq))
        .filter(|g| g.is_finite())
        .fold(extra_max, f64::max);
    linspace(0.0, (1.05 * top).max(1.0), points)
}

fn solve(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let scenarios = cfg.scenarios();
    let theories = scenarios.iter().map(Theory::new).collect::<Result<Vec<_>>>()?;
    let mut table = String::from("policy,N,c,beta_fixed,beta_closed,correction_bound,mean_se,se_q05\n");
    for t in &theories {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            t.policy,
            t.n_antennas,
            num(t.c),
            num(t.beta_fixed),
            num(t.beta_closed),
            num(t.correction_bound),
            num(t.mean_se),
            num(t.se_q05)
        );
    }
    let mut cdf = String::from("gamma");
    for p in &scenarios {
        let _ = write!(cdf, ",{}", column_label(p));
    }
    cdf.push('\n');
    for g in gamma_grid(&theories, 0.0, args.grid_points) {
        cdf.push_str(&num(g));
        for t in &theories {
            let _ = write!(cdf, ",{}", num(t.se_cdf(g)));
        }
        cdf.push('\n');
    }
    write(&args.out, "se_table.csv", &table)?;
    write(&args.out, "se_cdf.csv", &cdf)?;
    write_json(&args.out, "solve.json", &envelope(&cfg, theories))
}

#[derive(Serialize)]
struct EdfReport {
    policy: String,
    #[serde(rename = "N")]
    n_antennas: usize,
    n: usize,
    c: f64,
    ks: f64,
    ks_uncorrected_pi: f64,
}

fn ks_fallible<H: DistributionFunction>(h: &H, sample: &EmpiricalCdf) -> Result<f64> {
    try_ks_distance(|x| h.cdf(x), &h.knots(), sample)
}

fn edf(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let mut csv = String::from("policy,N,x,H_n,H,H_uncorrected_pi\n");
    let mut reports = Vec::new();
    for p in cfg.scenarios() {
        let sc = scenario(p.clone())?;
        eprintln!("e.d.f. for {} (n = {})", column_label(&p), p.n_mobiles());
        let sample = empirical_edf(&sc, cfg.seed)?;
        let dist = power_distribution(&p)?;
        let ap = AsymptoticParams::from_scenario(&p)?;
        let h = limiting_edf(&ap, &dist)?;
        let h_uncorrected = limiting_edf_variant(&ap, &dist, EdfVariant::UncorrectedPi)?;
        let positive: Vec<f64> = sample.samples().iter().copied().filter(|&x| x > 0.0).collect();
        let grid = match (positive.first(), positive.last()) {
            (Some(&lo), Some(&hi)) if hi > lo => {
                let (a, b) = (lo.ln(), hi.ln());
                linspace(a, b, args.grid_points).into_iter().map(f64::exp).collect()
            }
            (Some(&lo), _) => vec![lo],
            _ => vec![0.0],
        };
        for &x in &grid {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                p.policy.label(),
                p.n_antennas,
                num(x),
                num(sample.cdf(x)),
                num(h.eval(x)?),
                num(h_uncorrected.eval(x)?)
            );
        }
        reports.push(EdfReport {
            policy: p.policy.label(),
            n_antennas: p.n_antennas,
            n: p.n_mobiles(),
            c: p.c(),
            ks: ks_fallible(&h, &sample)?,
            ks_uncorrected_pi: ks_fallible(&h_uncorrected, &sample)?,
        });
    }
    write(&args.out, "edf.csv", &csv)?;
    write_json(&args.out, "edf.json", &envelope(&cfg, reports))
}

#[derive(Serialize)]
struct CompareReport {
    policy: String,
    #[serde(rename = "N")]
    n_antennas: usize,
    n: usize,
    c: f64,
    trials: usize,
    rejected: usize,
    mean_se_sim: f64,
    std_se_sim: f64,
    mean_se_theory: f64,
    relative_error: f64,
    ks: f64,
    mean_beta_n: f64,
    beta_fixed: f64,
    beta_closed: f64,
}

fn compare(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let scenarios = cfg.scenarios();
    let mut sims = Vec::new();
    let mut theories = Vec::new();
    for p in &scenarios {
        sims.push(experiment(&cfg, p, args.workers)?);
        theories.push(Theory::new(p)?);
    }
    let sim_max = sims
        .iter()
        .map(|s| *s.se_ecdf.samples().last().unwrap_or(&0.0))
        .fold(0.0, f64::max);
    let grid = gamma_grid(&theories, sim_max, args.grid_points);
    let mut csv = String::from("policy,N,gamma,sim_cdf,theory_cdf\n");
    let mut reports = Vec::new();
    for ((p, s), t) in scenarios.iter().zip(&sims).zip(&theories) {
        for &g in &grid {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                t.policy,
                p.n_antennas,
                num(g),
                num(s.se_ecdf.cdf(g)),
                num(t.se_cdf(g))
            );
        }
        reports.push(CompareReport {
            policy: t.policy.clone(),
            n_antennas: p.n_antennas,
            n: p.n_mobiles(),
            c: p.c(),
            trials: s.trials.len(),
            rejected: s.rejected,
            mean_se_sim: s.se.mean,
            std_se_sim: s.se.std,
            mean_se_theory: t.mean_se,
            relative_error: (s.se.mean - t.mean_se) / t.mean_se,
            ks: t.ks_to(&s.se_ecdf),
            mean_beta_n: s.beta_n.mean,
            beta_fixed: t.beta_fixed,
            beta_closed: t.beta_closed,
        });
    }
    write(&args.out, "compare_cdf.csv", &csv)?;
    write_json(&args.out, "compare.json", &envelope(&cfg, reports))
}
