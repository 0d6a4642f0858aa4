//! Trial orchestration, deterministic parallel seeding and summary statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    build_covariance, min_eigenvalue_diagnostic, mmse_sir, sample_channel, spectral_efficiency, Interferer,
};
use crate::error::{Error, Result};
use crate::geometry::{build_lattice, sample_mobiles, HexLattice, NetworkRealization};
use crate::params::ScenarioParams;
use crate::powerctl::{assign_powers, PowerAssignment, PowerBounds};

/// A validated scenario with its lattice built once and shared by all trials.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub lattice: HexLattice,
    pub bounds: PowerBounds,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        params.validate()?;
        let lattice = build_lattice(params.rho_c, params.disk_radius)?;
        let bounds = PowerBounds::resolve(&params)?;
        Ok(Scenario {
            params,
            lattice,
            bounds,
        })
    }

    /// Expected number of active interferers, `min(K, rho_m A_c) pi R^2 / A_c`.
    pub fn expected_actives(&self) -> f64 {
        let a = self.lattice.cell_area();
        let per_cell = (self.params.k as f64).min(self.params.rho_m * a);
        per_cell * std::f64::consts::PI * self.params.disk_radius.powi(2) / a
    }

    /// Human-readable warnings about configurations likely to reject trials.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let expected = self.expected_actives();
        if expected < 1.5 * self.params.n_antennas as f64 {
            out.push(format!(
                "about {expected:.0} active interferers expected for N = {}: the interference covariance will often be singular",
                self.params.n_antennas
            ));
        }
        out
    }

    fn realize(&self, rng: &mut ChaCha8Rng) -> Result<(NetworkRealization, PowerAssignment)> {
        let exclusion = self.params.policy.exclusion_radius();
        let network = sample_mobiles(&self.params, &self.lattice, exclusion, rng)?;
        let powers = assign_powers(&self.params, &network, &self.lattice, rng)?;
        Ok((network, powers))
    }
}

/// Private random stream of trial `index`: ChaCha8 keyed by the master seed,
/// with the trial index as stream id.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub sir: Option<f64>,
    pub se: Option<f64>,
    pub beta_n: Option<f64>,
    /// Number of interferers with nonzero power.
    pub actives: usize,
    /// Smallest eigenvalue of `N^(alpha/2 - 1) R`.
    pub min_eig: Option<f64>,
    pub rejected: bool,
    /// `P0 r0^-alpha` of the representative link.
    pub q: f64,
}

/// Runs one trial on the stream `rng`. A singular covariance yields a
/// rejected result rather than an error.
pub fn run_trial(scenario: &Scenario, trial: usize, rng: &mut ChaCha8Rng) -> Result<TrialResult> {
    let p = &scenario.params;
    let (network, powers) = scenario.realize(rng)?;
    let n = p.n_antennas;
    let g0 = sample_channel(n, rng);
    let actives: Vec<Interferer> = powers
        .active_indices()
        .map(|i| Interferer {
            power: powers.powers[i],
            distance: network.mobiles[i].distance,
            channel: sample_channel(n, rng),
        })
        .collect();
    let p0 = powers.representative_power;
    let r0 = network.representative.distance;
    let q = p0 * r0.powf(-p.alpha);
    let cov = build_covariance(&actives, p.alpha, n)?;
    let rejected = |min_eig| TrialResult {
        trial,
        sir: None,
        se: None,
        beta_n: None,
        actives: actives.len(),
        min_eig,
        rejected: true,
        q,
    };
    if actives.len() < n {
        return Ok(rejected(Some(0.0)));
    }
    let min_eig = min_eigenvalue_diagnostic(&cov, p.alpha);
    match mmse_sir(&g0, &cov, p0, r0, p.alpha) {
        Ok(out) => Ok(TrialResult {
            trial,
            sir: Some(out.sir),
            se: Some(spectral_efficiency(out.sir)),
            beta_n: Some(out.beta_n),
            actives: actives.len(),
            min_eig: Some(min_eig),
            rejected: false,
            q,
        }),
        Err(Error::SingularCovariance { .. }) => Ok(rejected(Some(min_eig))),
        Err(e) => Err(e),
    }
}

/// Samples `N^(alpha/2) P_i r_i^-alpha` for every potential interferer of one
/// realization (inactive mobiles contribute zeros).
pub fn edf_samples(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let p = &scenario.params;
    let (network, powers) = scenario.realize(rng)?;
    let scale = (p.n_antennas as f64).powf(p.alpha / 2.0);
    let mut out = vec![0.0; network.n_total];
    for (slot, i) in powers.active_indices().enumerate() {
        out[slot] = scale * powers.powers[i] * network.mobiles[i].distance.powf(-p.alpha);
    }
    Ok(out)
}

/// Right-continuous empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid("samples", "NaN sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    /// Fraction of samples `< x`.
    pub fn left_limit(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s < x) as f64 / self.len() as f64
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let k = ((p * self.len() as f64).ceil() as usize).clamp(1, self.len());
        self.sorted[k - 1]
    }
}

/// `sup_x |F(x) - G(x)|` for a nondecreasing `F` with jumps at most at `knots`.
/// Both functions are monotone between consecutive evaluation points, so the
/// supremum is attained at a one-sided limit of a sample point or a knot.
pub fn ks_distance<F: Fn(f64) -> f64>(f: F, knots: &[f64], g: &EmpiricalCdf) -> f64 {
    try_ks_distance(|x| Ok(f(x)), knots, g).expect("infallible")
}

/// [`ks_distance`] for an `F` whose evaluation can fail.
pub fn try_ks_distance<F: FnMut(f64) -> Result<f64>>(mut f: F, knots: &[f64], g: &EmpiricalCdf) -> Result<f64> {
    let mut points: Vec<f64> = g
        .samples()
        .iter()
        .chain(knots)
        .copied()
        .filter(|x| x.is_finite())
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut sup = 0.0f64;
    for x in points {
        let right = (f(x)? - g.cdf(x)).abs();
        let left = (f(x.next_down())? - g.left_limit(x)).abs();
        sup = sup.max(right).max(left);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    /// Sample standard deviation (denominator `n - 1`; zero for one sample).
    pub std: f64,
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        SampleStats { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub n_antennas: usize,
    pub trials: Vec<TrialResult>,
    pub rejected: usize,
    pub se: SampleStats,
    pub beta_n: SampleStats,
    /// Sorted spectral efficiencies of accepted trials.
    pub se_ecdf: EmpiricalCdf,
    /// e.d.f. of `N^(alpha/2) P_i r_i^-alpha`, when recorded.
    pub edf: Option<EmpiricalCdf>,
}

impl ExperimentSummary {
    pub fn from_trials(seed: u64, n_antennas: usize, trials: Vec<TrialResult>) -> Result<Self> {
        let accepted: Vec<&TrialResult> = trials.iter().filter(|t| !t.rejected).collect();
        if accepted.is_empty() {
            return Err(Error::AllTrialsRejected(trials.len()));
        }
        let se: Vec<f64> = accepted.iter().filter_map(|t| t.se).collect();
        let beta: Vec<f64> = accepted.iter().filter_map(|t| t.beta_n).collect();
        Ok(ExperimentSummary {
            seed,
            n_antennas,
            rejected: trials.len() - accepted.len(),
            se: SampleStats::of(&se),
            beta_n: SampleStats::of(&beta),
            se_ecdf: EmpiricalCdf::new(se)?,
            edf: None,
            trials,
        })
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / self.trials.len() as f64
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))
}

/// Runs `n_trials` trials on `workers` threads. Trial `i` uses
/// [`trial_rng`]`(master_seed, i)`, so the result does not depend on `workers`.
pub fn run_experiment(
    scenario: &Scenario,
    n_trials: usize,
    master_seed: u64,
    workers: usize,
) -> Result<ExperimentSummary> {
    if n_trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let trials: Vec<TrialResult> = pool(workers)?.install(|| {
        (0..n_trials)
            .into_par_iter()
            .map(|i| run_trial(scenario, i, &mut trial_rng(master_seed, i as u64)))
            .collect::<Result<_>>()
    })?;
    ExperimentSummary::from_trials(master_seed, scenario.params.n_antennas, trials)
}

/// e.d.f. of `N^(alpha/2) P_i r_i^-alpha` from one realization drawn on the
/// stream of trial 0.
pub fn empirical_edf(scenario: &Scenario, master_seed: u64) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(edf_samples(scenario, &mut trial_rng(master_seed, 0))?)
}
