//! Per-cell power control with the K-active cap, and the exact marginal law
//! of a potential mobile's transmit power.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HexLattice, Hexagon, NetworkRealization};
use crate::numeric::Quadrature;
use crate::params::ScenarioParams;

fn one() -> f64 {
    1.0
}

/// How a selected mobile's power depends on its position in the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PowerPolicy {
    /// The closest half of each cell's active set transmits at `p_low`,
    /// the rest at `p_high`.
    TwoLevel { p_low: f64, p_high: f64 },
    /// Power `d^(alpha * epsilon)` at distance `d` from the own base station;
    /// mobiles closer than `d_min` are silent.
    Fractional {
        epsilon: f64,
        #[serde(default = "one")]
        d_min: f64,
    },
    /// Fractional control with `epsilon = 1`.
    PathLossInversion {
        #[serde(default = "one")]
        d_min: f64,
    },
    /// Every selected mobile transmits at `power`.
    Constant { power: f64 },
}

impl PowerPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be positive, got {v}")))
            }
        };
        match *self {
            PowerPolicy::TwoLevel { p_low, p_high } => {
                positive("policy.p_low", p_low)?;
                positive("policy.p_high", p_high)
            }
            PowerPolicy::Fractional { epsilon, d_min } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::invalid(
                        "policy.epsilon",
                        format!("must lie in [0, 1], got {epsilon}"),
                    ));
                }
                positive("policy.d_min", d_min)
            }
            PowerPolicy::PathLossInversion { d_min } => positive("policy.d_min", d_min),
            PowerPolicy::Constant { power } => positive("policy.power", power),
        }
    }

    /// Mobiles closer than this to their base station never transmit.
    pub fn exclusion_radius(&self) -> f64 {
        match *self {
            PowerPolicy::Fractional { d_min, .. } | PowerPolicy::PathLossInversion { d_min } => d_min,
            _ => 0.0,
        }
    }

    /// `epsilon` for the distance-based policies.
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            PowerPolicy::Fractional { epsilon, .. } => Some(epsilon),
            PowerPolicy::PathLossInversion { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Short label for reports, e.g. `fractional_eps0.5`.
    pub fn label(&self) -> String {
        match *self {
            PowerPolicy::TwoLevel { p_low, p_high } => format!("two_level_{p_low}_{p_high}"),
            PowerPolicy::Fractional { epsilon, .. } => format!("fractional_eps{epsilon}"),
            PowerPolicy::PathLossInversion { .. } => "path_loss_inversion".to_string(),
            PowerPolicy::Constant { power } => format!("constant_{power}"),
        }
    }

    /// Smallest and largest power the policy can assign to an active mobile.
    pub fn power_range(&self, alpha: f64, cell: &Hexagon) -> (f64, f64) {
        match *self {
            PowerPolicy::TwoLevel { p_low, p_high } => (p_low.min(p_high), p_low.max(p_high)),
            PowerPolicy::Fractional { .. } | PowerPolicy::PathLossInversion { .. } => {
                let k = alpha * self.epsilon().unwrap_or(1.0);
                (self.exclusion_radius().powf(k), cell.circumradius().powf(k))
            }
            PowerPolicy::Constant { power } => (power, power),
        }
    }
}

/// `[P_lb, P_M]` for a scenario: defaults are the policy's own range (with
/// the floor also capped at 1); overrides must contain that range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub p_lb: f64,
    pub p_max: f64,
}

impl PowerBounds {
    pub fn resolve(params: &ScenarioParams) -> Result<Self> {
        let cell = Hexagon::with_area(params.cell_area());
        let (lo, hi) = params.policy.power_range(params.alpha, &cell);
        let p_lb = params.p_lb.unwrap_or(lo.min(1.0));
        let p_max = params.p_max.unwrap_or(hi);
        if p_lb > lo {
            return Err(Error::invalid(
                "P_lb",
                format!("policy assigns power {lo} below the floor {p_lb}"),
            ));
        }
        if p_max < hi {
            return Err(Error::invalid(
                "P_M",
                format!("policy assigns power {hi} above the cap {p_max}"),
            ));
        }
        Ok(PowerBounds { p_lb, p_max })
    }

    pub fn admits(&self, p: f64) -> bool {
        p == 0.0 || (p >= self.p_lb && p <= self.p_max)
    }
}

/// Uniformly random subset of `min(k, |members|)` cell members; a `forced`
/// member (the representative) is always kept and takes one of the `k` slots.
pub fn select_active<R: Rng + ?Sized>(members: &[usize], k: usize, forced: Option<usize>, rng: &mut R) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(k.min(members.len() + 1));
    let mut slots = k;
    if let Some(f) = forced {
        chosen.push(f);
        slots = slots.saturating_sub(1);
    }
    let pool: Vec<usize> = members.iter().copied().filter(|&m| Some(m) != forced).collect();
    let take = slots.min(pool.len());
    chosen.extend(index::sample(rng, pool.len(), take).into_iter().map(|i| pool[i]));
    chosen
}

/// Transmit powers for one trial. Index `i` refers to `network.mobiles[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAssignment {
    pub powers: Vec<f64>,
    pub representative_power: f64,
}

impl PowerAssignment {
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.powers.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }

    pub fn active_count(&self) -> usize {
        self.powers.iter().filter(|&&p| p > 0.0).count()
    }

    /// Checks the K-cap per cell (representative included in its cell), the
    /// `{0} U [P_lb, P_M]` support and that the representative transmits.
    pub fn check(&self, network: &NetworkRealization, cells: usize, k: usize, bounds: &PowerBounds) -> Result<()> {
        if !(self.representative_power > 0.0 && bounds.admits(self.representative_power)) {
            return Err(Error::invalid(
                "P_0",
                format!("representative power {}", self.representative_power),
            ));
        }
        let mut per_cell = vec![0usize; cells];
        per_cell[network.representative.cell] += 1;
        for (i, &p) in self.powers.iter().enumerate() {
            if !bounds.admits(p) {
                return Err(Error::invalid(
                    "P_i",
                    format!("power {p} outside [{}, {}]", bounds.p_lb, bounds.p_max),
                ));
            }
            if p > 0.0 {
                per_cell[network.mobiles[i].cell] += 1;
            }
        }
        match per_cell.iter().position(|&c| c > k) {
            Some(cell) => Err(Error::invalid(
                "K",
                format!("cell {cell} has {} active mobiles", per_cell[cell]),
            )),
            None => Ok(()),
        }
    }
}

/// Selects at most `K` eligible mobiles per cell and assigns their powers.
/// Mobiles inside the exclusion radius are not eligible and use no slot.
pub fn assign_powers<R: Rng + ?Sized>(
    params: &ScenarioParams,
    network: &NetworkRealization,
    lattice: &HexLattice,
    rng: &mut R,
) -> Result<PowerAssignment> {
    let policy = params.policy;
    PowerBounds::resolve(params)?;
    let exclusion = policy.exclusion_radius();
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); lattice.len()];
    for (i, m) in network.mobiles.iter().enumerate() {
        if m.center_distance >= exclusion {
            by_cell[m.cell].push(i);
        }
    }
    // The representative is tagged with an index past the end of `mobiles`.
    let rep = network.mobiles.len();
    let center_distance = |i: usize| {
        if i == rep {
            network.representative.center_distance
        } else {
            network.mobiles[i].center_distance
        }
    };
    let mut powers = vec![0.0; network.mobiles.len()];
    let mut representative_power = 0.0;
    for (cell, members) in by_cell.iter().enumerate() {
        let forced = (cell == network.representative.cell).then_some(rep);
        let mut chosen = select_active(members, params.k, forced, rng);
        if let PowerPolicy::TwoLevel { .. } = policy {
            chosen.sort_by(|&a, &b| center_distance(a).total_cmp(&center_distance(b)).then(a.cmp(&b)));
        }
        let n_low = chosen.len() / 2;
        for (rank, &i) in chosen.iter().enumerate() {
            let p = match policy {
                PowerPolicy::TwoLevel { p_low, p_high } => {
                    if rank < n_low {
                        p_low
                    } else {
                        p_high
                    }
                }
                PowerPolicy::Fractional { .. } | PowerPolicy::PathLossInversion { .. } => {
                    let eps = policy.epsilon().unwrap_or(1.0);
                    center_distance(i).powf(params.alpha * eps)
                }
                PowerPolicy::Constant { power } => power,
            };
            if i == rep {
                representative_power = p;
            } else {
                powers[i] = p;
            }
        }
    }
    Ok(PowerAssignment {
        powers,
        representative_power,
    })
}

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolutely continuous component: `P = X^exponent` with `X` having a
/// normalised density on `[lo, hi]`, smooth between `breaks`.
#[derive(Clone)]
pub struct ContinuousPart {
    mass: f64,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    exponent: f64,
    density: Density,
}

impl std::fmt::Debug for ContinuousPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuousPart")
            .field("mass", &self.mass)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("breaks", &self.breaks)
            .field("exponent", &self.exponent)
            .finish()
    }
}

impl ContinuousPart {
    fn pieces(&self, from: f64) -> Vec<f64> {
        let start = from.max(self.lo);
        let mut pts = vec![start];
        pts.extend(self.breaks.iter().copied().filter(|&b| b > start && b < self.hi));
        pts.push(self.hi);
        pts
    }

    fn integrate<F: Fn(f64) -> f64>(&self, from: f64, h: F) -> Result<f64> {
        if from >= self.hi {
            return Ok(0.0);
        }
        let q = Quadrature::with_tolerance(0.0, 1e-12);
        let k = self.exponent;
        let est = q.integrate_pieces(|x| h(x.powf(k)) * (self.density)(x), &self.pieces(from))?;
        Ok(self.mass * est.value)
    }
}

/// Marginal law of a potential mobile's transmit power: an atom at zero
/// (inactive mobiles), further atoms, and an optional continuous part.
/// Integrals against it are measure integrals, so discrete policies work.
#[derive(Debug, Clone)]
pub struct PowerDistribution {
    atoms: Vec<(f64, f64)>,
    continuous: Option<ContinuousPart>,
}

impl PowerDistribution {
    /// `P = power` with probability `activity`, else zero.
    pub fn point_mass(power: f64, activity: f64) -> Self {
        PowerDistribution {
            atoms: vec![(power, activity)],
            continuous: None,
        }
    }

    /// Positive atoms `(power, probability)`; the remaining mass sits at zero.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Self {
        PowerDistribution {
            atoms,
            continuous: None,
        }
    }

    /// Power `d^exponent` where `d` is the distance of a uniform point in
    /// `cell` conditioned on `d >= d_min`, carried with probability `activity`.
    pub fn hexagon_power_law(cell: Hexagon, d_min: f64, exponent: f64, activity: f64) -> Self {
        if exponent == 0.0 {
            return Self::point_mass(1.0, activity);
        }
        let norm = 1.0 - cell.distance_cdf(d_min);
        let breaks = if d_min < cell.apothem() {
            vec![cell.apothem()]
        } else {
            Vec::new()
        };
        PowerDistribution {
            atoms: Vec::new(),
            continuous: Some(ContinuousPart {
                mass: activity,
                lo: d_min,
                hi: cell.circumradius(),
                breaks,
                exponent,
                density: Arc::new(move |d| cell.distance_pdf(d) / norm),
            }),
        }
    }

    pub fn activity(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.continuous.as_ref().map_or(0.0, |c| c.mass)
    }

    pub fn zero_mass(&self) -> f64 {
        1.0 - self.activity()
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn continuous(&self) -> Option<&ContinuousPart> {
        self.continuous.as_ref()
    }

    /// Mass of zero atom + atoms + numerically integrated continuous density.
    pub fn total_mass(&self) -> Result<f64> {
        let cont = match &self.continuous {
            Some(c) => c.integrate(c.lo, |_| 1.0)?,
            None => 0.0,
        };
        Ok(self.zero_mass() + self.atoms.iter().map(|a| a.1).sum::<f64>() + cont)
    }

    pub fn max_power(&self) -> f64 {
        let atoms = self.atoms.iter().map(|a| a.0).fold(0.0, f64::max);
        let cont = self.continuous.as_ref().map_or(0.0, |c| c.hi.powf(c.exponent));
        atoms.max(cont)
    }

    pub fn min_positive_power(&self) -> f64 {
        let atoms = self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let cont = self
            .continuous
            .as_ref()
            .map_or(f64::INFINITY, |c| c.lo.powf(c.exponent));
        atoms.min(cont)
    }

    /// Powers at which the measure has an atom or its density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        if let Some(c) = &self.continuous {
            pts.push(c.lo.powf(c.exponent));
            pts.push(c.hi.powf(c.exponent));
            pts.extend(c.breaks.iter().map(|b| b.powf(c.exponent)));
        }
        pts.retain(|&p| p > 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `E[h(P) 1{P > t}]` for `t >= 0`.
    pub fn expect_above<F: Fn(f64) -> f64>(&self, t: f64, h: F) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 > t).map(|&(p, m)| m * h(p)).sum();
        let cont = match &self.continuous {
            Some(c) => c.integrate(t.powf(1.0 / c.exponent), &h)?,
            None => 0.0,
        };
        Ok(atoms + cont)
    }

    pub fn tail_probability(&self, t: f64) -> Result<f64> {
        self.expect_above(t, |_| 1.0)
    }

    /// `P(P <= p)`.
    pub fn cdf(&self, p: f64) -> Result<f64> {
        if p < 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 - self.tail_probability(p)?)
    }

    /// Density of the continuous component in power units, `f_P(p)`.
    pub fn density(&self, p: f64) -> f64 {
        match &self.continuous {
            Some(c) if p > 0.0 => {
                let x = p.powf(1.0 / c.exponent);
                if x <= c.lo || x >= c.hi {
                    0.0
                } else {
                    c.mass * (c.density)(x) * x / (c.exponent * p)
                }
            }
            _ => 0.0,
        }
    }

    /// `E[P^(2/alpha) 1{P > t}]`.
    pub fn fractional_moment(&self, alpha: f64, t: f64) -> Result<f64> {
        let e = 2.0 / alpha;
        self.expect_above(t.max(0.0), |p| p.powf(e))
    }

    /// The same law restricted to active mobiles (mass renormalised to one).
    pub fn conditional_on_active(&self) -> Self {
        let a = self.activity();
        PowerDistribution {
            atoms: self.atoms.iter().map(|&(p, m)| (p, m / a)).collect(),
            continuous: self
                .continuous
                .clone()
                .map(|c| ContinuousPart { mass: c.mass / a, ..c }),
        }
    }
}

/// Exact marginal power law of a potential mobile under `params.policy`.
pub fn power_distribution(params: &ScenarioParams) -> Result<PowerDistribution> {
    params.policy.validate()?;
    let activity = params.activity();
    let cell = Hexagon::with_area(params.cell_area());
    Ok(match params.policy {
        PowerPolicy::Constant { power } => PowerDistribution::point_mass(power, activity),
        PowerPolicy::TwoLevel { p_low, p_high } => {
            let k = params.k as f64;
            let low_share = (params.k / 2) as f64 / k;
            let mut atoms = vec![(p_low, activity * low_share), (p_high, activity * (1.0 - low_share))];
            atoms.retain(|a| a.1 > 0.0);
            PowerDistribution::from_atoms(atoms)
        }
        PowerPolicy::Fractional { .. } | PowerPolicy::PathLossInversion { .. } => {
            let eps = params.policy.epsilon().unwrap_or(1.0);
            PowerDistribution::hexagon_power_law(cell, params.policy.exclusion_radius(), params.alpha * eps, activity)
        }
    })
}

/// Law of `q = P_0 r_0^-alpha` for the representative mobile.
#[derive(Debug, Clone)]
pub enum QDistribution {
    /// `q` is deterministic.
    Step { at: f64 },
    /// `q = scale * r_0^exponent` with `exponent < 0` and `r_0` the distance of
    /// a uniform point in the cell conditioned on `r_0 >= d_min`.
    DistancePower {
        cell: Hexagon,
        d_min: f64,
        scale: f64,
        exponent: f64,
    },
    /// Two-level powers: the representative is one of `k` i.i.d. uniform
    /// active mobiles and gets `p_low` when its distance ranks among the
    /// `k / 2` smallest.
    TwoLevel {
        cell: Hexagon,
        p_low: f64,
        p_high: f64,
        k: usize,
        alpha: f64,
    },
}

/// The CDF `F_q` for the representative mobile under `params.policy`.
pub fn representative_q_cdf(params: &ScenarioParams) -> Result<QDistribution> {
    params.policy.validate()?;
    let cell = Hexagon::with_area(params.cell_area());
    let alpha = params.alpha;
    Ok(match params.policy {
        PowerPolicy::PathLossInversion { .. } | PowerPolicy::Fractional { epsilon: 1.0, .. } => {
            QDistribution::Step { at: 1.0 }
        }
        PowerPolicy::Fractional { epsilon, d_min } => QDistribution::DistancePower {
            cell,
            d_min,
            scale: 1.0,
            exponent: alpha * (epsilon - 1.0),
        },
        PowerPolicy::Constant { power } => QDistribution::DistancePower {
            cell,
            d_min: 0.0,
            scale: power,
            exponent: -alpha,
        },
        PowerPolicy::TwoLevel { p_low, p_high } => QDistribution::TwoLevel {
            cell,
            p_low,
            p_high,
            k: params.k,
            alpha,
        },
    })
}

/// `E[min(X, m)] / k` for `X ~ Binomial(k, u)`; this is the integral over
/// `[0, u]` of `P(Binomial(k - 1, v) <= m - 1)`.
fn low_rank_integral(k: usize, m: usize, u: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if u >= 1.0 {
        return m as f64 / k as f64;
    }
    if u <= 0.0 {
        return 0.0;
    }
    let ratio = u / (1.0 - u);
    let mut pmf = (1.0 - u).powi(k as i32);
    let mut deficit = 0.0;
    for i in 0..m.min(k + 1) {
        deficit += (m - i) as f64 * pmf;
        pmf *= (k - i) as f64 / (i + 1) as f64 * ratio;
    }
    (m as f64 - deficit) / k as f64
}

impl QDistribution {
    pub fn cdf(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        match *self {
            QDistribution::Step { at } => {
                if q >= at {
                    1.0
                } else {
                    0.0
                }
            }
            QDistribution::DistancePower {
                cell,
                d_min,
                scale,
                exponent,
            } => {
                let d = (q / scale).powf(1.0 / exponent);
                let f_min = cell.distance_cdf(d_min);
                let g = ((cell.distance_cdf(d) - f_min) / (1.0 - f_min)).clamp(0.0, 1.0);
                1.0 - g
            }
            QDistribution::TwoLevel {
                cell,
                p_low,
                p_high,
                k,
                alpha,
            } => {
                let m = k / 2;
                let u_low = cell.distance_cdf((p_low / q).powf(1.0 / alpha));
                let u_high = cell.distance_cdf((p_high / q).powf(1.0 / alpha));
                let g = |u| low_rank_integral(k, m, u);
                let g1 = m as f64 / k as f64;
                let low = g1 - g(u_low);
                let high = (1.0 - u_high) - (g1 - g(u_high));
                (low + high).clamp(0.0, 1.0)
            }
        }
    }

    /// Values of `q` where the CDF jumps or has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            QDistribution::Step { at } => vec![at],
            QDistribution::DistancePower {
                cell,
                d_min,
                scale,
                exponent,
            } => {
                let mut v = vec![
                    scale * cell.circumradius().powf(exponent),
                    scale * cell.apothem().powf(exponent),
                ];
                if d_min > 0.0 {
                    v.push(scale * d_min.powf(exponent));
                }
                v
            }
            QDistribution::TwoLevel {
                cell,
                p_low,
                p_high,
                alpha,
                ..
            } => [p_low, p_high]
                .iter()
                .flat_map(|p| [p * cell.circumradius().powf(-alpha), p * cell.apothem().powf(-alpha)])
                .collect(),
        }
    }
}
