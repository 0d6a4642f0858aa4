//! Large-system limits for the normalised MMSE SIR.
//!
//! `beta_N = N^(-alpha/2) g0^H R^-1 g0` converges to the positive root of
//!
//! ```text
//! E[P^(2/a)] b^(2/a) (pi/a) csc(2 pi/a)
//!   - (b / a) int_0^T t^(-2/a) / (1 + t b) M(t (c / (pi rho_m))^(a/2)) dt
//!   = 1 / (2 pi rho_m)
//! ```
//!
//! with `M(t) = E[P^(2/a) 1{P > t}]` and `T = P_M (pi rho_m / c)^(a/2)`. This
//! is `1 = b c int t / (1 + t b) dH(t)` divided by `2 pi rho_m`, so the
//! residual is increasing in `b` and has a root exactly when `c P(P > 0) > 1`.
//! The second term vanishes as `c -> inf`, which gives the closed form used
//! for the spectral-efficiency approximations. [`edf_fixed_point`] solves the same limit
//! through the limiting e.d.f. of the received powers, which is an independent
//! numerical route to the same number.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bracket_increasing, brent, Bracket, Quadrature};
use crate::params::ScenarioParams;
use crate::powerctl::{PowerDistribution, QDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub alpha: f64,
    pub rho_m: f64,
    /// `n / N`; `f64::INFINITY` selects the closed-form regime.
    pub c: f64,
}

impl AsymptoticParams {
    pub fn new(alpha: f64, rho_m: f64, c: f64) -> Result<Self> {
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must exceed 2, got {alpha}")));
        }
        if !(rho_m > 0.0 && rho_m.is_finite()) {
            return Err(Error::invalid("rho_m", format!("must be positive, got {rho_m}")));
        }
        if !(c > 0.0) {
            return Err(Error::invalid("c", format!("must be positive, got {c}")));
        }
        Ok(AsymptoticParams { alpha, rho_m, c })
    }

    pub fn from_scenario(p: &ScenarioParams) -> Result<Self> {
        Self::new(p.alpha, p.rho_m, p.c())
    }

    /// `(c / (pi rho_m))^(alpha/2)`: maps `tau` to the power threshold.
    fn power_scale(&self) -> f64 {
        (self.c / (PI * self.rho_m)).powf(self.alpha / 2.0)
    }

    /// `(pi/alpha) csc(2 pi/alpha)`.
    fn csc_factor(&self) -> f64 {
        (PI / self.alpha) / (2.0 * PI / self.alpha).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSolution {
    pub beta: f64,
    pub method: Method,
    pub params: AsymptoticParams,
    /// `E[P^(2/alpha)]` over all potential mobiles.
    pub moment: f64,
    pub p_max: f64,
}

// Quadrature with a fallible integrand: the first error is kept and
// reported after the integration finishes.
fn integrate_fallible<F>(q: &Quadrature, points: &[f64], f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let est = q.integrate_pieces(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        points,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

fn sorted_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&p| p > lo && p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn outer_quadrature() -> Quadrature {
    Quadrature::with_tolerance(1e-300, 1e-11)
}

/// `int_0^T t^(-2/a) g(t) dt` after `t = u^(a/(a-2))`, which cancels the
/// endpoint singularity exactly: the integrand becomes `kappa g(u^kappa)`.
fn singular_integral<F>(alpha: f64, upper: f64, knots: &[f64], g: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let kappa = alpha / (alpha - 2.0);
    let u_max = upper.powf(1.0 / kappa);
    let pts = sorted_points(knots.iter().map(|t| t.powf(1.0 / kappa)).collect(), 0.0, u_max);
    integrate_fallible(&outer_quadrature(), &pts, |u| Ok(kappa * g(u.powf(kappa))?))
}

/// The subtracted integral term of the fixed-point equation at `beta`.
pub fn second_term(beta: f64, params: &AsymptoticParams, dist: &PowerDistribution) -> Result<f64> {
    if params.c.is_infinite() {
        return Ok(0.0);
    }
    let s = params.power_scale();
    let upper = dist.max_power() / s;
    let knots: Vec<f64> = dist.breakpoints().iter().map(|b| b / s).collect();
    let integral = singular_integral(params.alpha, upper, &knots, |tau| {
        Ok(dist.fractional_moment(params.alpha, tau * s)? / (1.0 + tau * beta))
    })?;
    Ok(beta / params.alpha * integral)
}

/// Left-hand side minus right-hand side of the fixed-point equation.
/// Increasing in `beta`, from `-1/(2 pi rho_m)` at `0+`.
pub fn fixed_point_residual(beta: f64, params: &AsymptoticParams, dist: &PowerDistribution) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let moment = dist.fractional_moment(params.alpha, 0.0)?;
    let first = moment * beta.powf(2.0 / params.alpha) * params.csc_factor();
    Ok(first - second_term(beta, params, dist)? - 1.0 / (2.0 * params.rho_m * PI))
}

/// `[alpha sin(2 pi/alpha) / (2 pi^2 rho_m E[P^(2/alpha)])]^(alpha/2)`.
fn closed_form_value(alpha: f64, rho_m: f64, moment: f64) -> f64 {
    (alpha * (2.0 * PI / alpha).sin() / (2.0 * PI * PI * rho_m * moment)).powf(alpha / 2.0)
}

pub fn beta_closed_form(params: &AsymptoticParams, dist: &PowerDistribution) -> Result<AsymptoticSolution> {
    let moment = dist.fractional_moment(params.alpha, 0.0)?;
    if !(moment > 0.0) {
        return Err(Error::invalid("power distribution", "E[P^(2/alpha)] must be positive"));
    }
    Ok(AsymptoticSolution {
        beta: closed_form_value(params.alpha, params.rho_m, moment),
        method: Method::ClosedForm,
        params: *params,
        moment,
        p_max: dist.max_power(),
    })
}

const MONOTONE_SCAN_POINTS: usize = 8;

/// Root of [`fixed_point_residual`], bracketed upwards from the closed form
/// (the residual there is `-second_term <= 0`) and refined with Brent's
/// method to 1e-12 relative.
pub fn solve_beta(params: &AsymptoticParams, dist: &PowerDistribution) -> Result<AsymptoticSolution> {
    let closed = beta_closed_form(params, dist)?;
    let f = |b: f64| fixed_point_residual(b, params, dist);
    let bracket = bracket_increasing(f, closed.beta, 200)?;
    let beta = if bracket.lo == bracket.hi {
        bracket.lo
    } else {
        check_monotone(&f, &bracket)?;
        brent(f, bracket, 0.0, 1e-12, 200)?
    };
    Ok(AsymptoticSolution {
        beta,
        method: Method::FixedPoint,
        ..closed
    })
}

fn check_monotone<F: Fn(f64) -> Result<f64>>(f: &F, br: &Bracket) -> Result<()> {
    let mut prev = br.f_lo;
    for i in 1..MONOTONE_SCAN_POINTS {
        let x = br.lo + (br.hi - br.lo) * i as f64 / MONOTONE_SCAN_POINTS as f64;
        let v = f(x)?;
        if v < prev {
            return Err(Error::NonMonotone { lo: br.lo, hi: br.hi });
        }
        prev = v;
    }
    if br.f_hi < prev {
        return Err(Error::NonMonotone { lo: br.lo, hi: br.hi });
    }
    Ok(())
}

/// Upper bound on [`second_term`] from `P <= P_M`:
/// `(beta / alpha) P_M^(2/alpha) int_0^T t^(-2/alpha) / (1 + t beta) dt`.
pub fn correction_bound(beta: f64, params: &AsymptoticParams, p_max: f64) -> Result<f64> {
    if params.c.is_infinite() {
        return Ok(0.0);
    }
    let upper = p_max / params.power_scale();
    let integral = singular_integral(params.alpha, upper, &[], |tau| Ok(1.0 / (1.0 + tau * beta)))?;
    Ok(beta / params.alpha * p_max.powf(2.0 / params.alpha) * integral)
}

/// Closed-form spectral-efficiency approximation for `N` antennas: the
/// representative with `q = P0 r0^-alpha` gets `log2(1 + q N^(alpha/2) beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeApproximation {
    pub n_antennas: usize,
    /// `N^(alpha/2) beta_closed`.
    pub gain: f64,
}

impl SeApproximation {
    pub fn new(n_antennas: usize, params: &AsymptoticParams, dist: &PowerDistribution) -> Result<Self> {
        let beta = beta_closed_form(params, dist)?.beta;
        Ok(SeApproximation {
            n_antennas,
            gain: (n_antennas as f64).powf(params.alpha / 2.0) * beta,
        })
    }

    pub fn se(&self, q: f64) -> f64 {
        (1.0 + q * self.gain).log2()
    }

    /// `F_q((2^gamma - 1) / gain)`.
    pub fn cdf(&self, gamma: f64, fq: &QDistribution) -> f64 {
        if gamma < 0.0 {
            return 0.0;
        }
        fq.cdf((gamma.exp2() - 1.0) / self.gain)
    }

    /// Smallest `gamma` with `cdf(gamma) >= p`.
    pub fn quantile(&self, p: f64, fq: &QDistribution) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.cdf(hi, fq) < p {
            hi *= 2.0;
            if hi > 1e4 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid, fq) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        hi
    }

    /// `E[log2(1 + q gain)]` under `F_q`, as `int (1 - F_q(q)) gain / ((1 + q gain) ln 2) dq`.
    pub fn mean(&self, fq: &QDistribution) -> Result<f64> {
        let integrand = |q: f64| (1.0 - fq.cdf(q)) * self.gain / ((1.0 + q * self.gain) * std::f64::consts::LN_2);
        let knots = fq.breakpoints();
        let last = knots.iter().copied().fold(0.0, f64::max);
        let pts = sorted_points(knots, 0.0, last);
        let quad = Quadrature::with_tolerance(1e-12, 1e-10);
        let body = quad.integrate_pieces(integrand, &pts)?.value;
        let tail = quad.integrate_to_infinity(integrand, last)?.value;
        Ok(body + tail)
    }
}

/// Closed-form spectral efficiency for a link with power `p0` at distance `r0`.
pub fn asymptotic_se(
    p0: f64,
    r0: f64,
    n_antennas: usize,
    params: &AsymptoticParams,
    dist: &PowerDistribution,
) -> Result<f64> {
    if !(p0 > 0.0 && r0 > 0.0) || n_antennas == 0 {
        return Err(Error::invalid("link", "power, distance and N must be positive"));
    }
    let approx = SeApproximation::new(n_antennas, params, dist)?;
    Ok(approx.se(p0 * r0.powf(-params.alpha)))
}

/// Approximate CDF of the spectral efficiency at `gamma`.
pub fn se_cdf(
    gamma: f64,
    fq: &QDistribution,
    n_antennas: usize,
    params: &AsymptoticParams,
    dist: &PowerDistribution,
) -> Result<f64> {
    Ok(SeApproximation::new(n_antennas, params, dist)?.cdf(gamma, fq))
}

/// A distribution function on `[0, inf)` usable by [`edf_fixed_point`].
pub trait DistributionFunction {
    fn cdf(&self, x: f64) -> Result<f64>;
    /// Points where the function jumps or has a kink.
    fn knots(&self) -> Vec<f64>;
}

/// Unit step at `at` (all mass at one point).
#[derive(Debug, Clone, Copy)]
pub struct PointMass {
    pub at: f64,
}

impl DistributionFunction for PointMass {
    fn cdf(&self, x: f64) -> Result<f64> {
        Ok(if x >= self.at { 1.0 } else { 0.0 })
    }

    fn knots(&self) -> Vec<f64> {
        vec![self.at]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdfVariant {
    /// Coefficient `pi rho_m / c`, as carried through the derivation.
    #[default]
    Derived,
    /// Coefficient `rho_m / c`, without the factor pi. Kept for
    /// comparison only.
    UncorrectedPi,
}

/// Limit `H(x)` of the e.d.f. of `N^(alpha/2) P_i r_i^-alpha`.
#[derive(Debug, Clone)]
pub struct LimitingEdf {
    pub params: AsymptoticParams,
    pub dist: PowerDistribution,
    pub variant: EdfVariant,
    moment: f64,
}

pub fn limiting_edf(params: &AsymptoticParams, dist: &PowerDistribution) -> Result<LimitingEdf> {
    limiting_edf_variant(params, dist, EdfVariant::Derived)
}

pub fn limiting_edf_variant(
    params: &AsymptoticParams,
    dist: &PowerDistribution,
    variant: EdfVariant,
) -> Result<LimitingEdf> {
    if params.c.is_infinite() {
        return Err(Error::invalid("c", "the limiting e.d.f. needs a finite c"));
    }
    Ok(LimitingEdf {
        params: *params,
        dist: dist.clone(),
        variant,
        moment: dist.fractional_moment(params.alpha, 0.0)?,
    })
}

impl LimitingEdf {
    fn coefficient(&self, x: f64) -> f64 {
        let pi = match self.variant {
            EdfVariant::Derived => PI,
            EdfVariant::UncorrectedPi => 1.0,
        };
        pi * self.params.rho_m * x.powf(-2.0 / self.params.alpha) / self.params.c
    }

    /// `H(x) = 1 - k(x) E[P^(2/a)] - int_{P > x s} (1 - k(x) P^(2/a)) dF_P`
    /// with `k(x) = pi rho_m x^(-2/a) / c` and `s = (c / (pi rho_m))^(a/2)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            return Ok(self.dist.zero_mass());
        }
        let k = self.coefficient(x);
        let e = 2.0 / self.params.alpha;
        let threshold = x * self.params.power_scale();
        let tail = self.dist.expect_above(threshold, |p| 1.0 - k * p.powf(e))?;
        Ok(1.0 - k * self.moment - tail)
    }
}

impl DistributionFunction for LimitingEdf {
    fn cdf(&self, x: f64) -> Result<f64> {
        self.eval(x)
    }

    fn knots(&self) -> Vec<f64> {
        let s = self.params.power_scale();
        self.dist.breakpoints().iter().map(|b| b / s).collect()
    }
}

/// `int_0^inf tau / (1 + tau g) dH(tau)`, integrated by parts to
/// `int_0^inf (1 - H(tau)) / (1 + g tau)^2 dtau`.
fn stieltjes_integral<H: DistributionFunction>(h: &H, gamma: f64) -> Result<f64> {
    let mut knots = h.knots();
    knots.retain(|&k| k > 0.0 && k.is_finite());
    knots.sort_by(f64::total_cmp);
    let last = knots.last().copied().unwrap_or(1.0);
    let pts = sorted_points(knots, 0.0, last);
    let quad = outer_quadrature();
    let integrand = |tau: f64| Ok((1.0 - h.cdf(tau)?) / (1.0 + gamma * tau).powi(2));
    let body = integrate_fallible(&quad, &pts, integrand)?;
    // Tail: tau = last * w^-p with p chosen so the leading tau^(-2-2/a)-type
    // decay maps to a regular integrand; p = 4/3 suits every alpha > 2 well.
    let p = 4.0 / 3.0;
    let tail = integrate_fallible(&quad, &[0.0, 1.0], |w: f64| {
        if w == 0.0 {
            return Ok(0.0);
        }
        let tau = last * w.powf(-p);
        Ok(integrand(tau)? * p * last * w.powf(-p - 1.0))
    })?;
    Ok(body + tail)
}

/// Positive root `gamma` of `1 = gamma c int tau / (1 + tau gamma) dH(tau)`.
pub fn edf_fixed_point<H: DistributionFunction>(h: &H, c: f64) -> Result<f64> {
    let active = 1.0 - h.cdf(0.0)?;
    if c * active <= 1.0 {
        return Err(Error::NoBracket(format!(
            "c * P(tau > 0) = {} <= 1: the fixed point has no positive root",
            c * active
        )));
    }
    let phi = |g: f64| Ok(g * c * stieltjes_integral(h, g)? - 1.0);
    let seed = h.knots().into_iter().filter(|k| *k > 0.0).fold(f64::INFINITY, f64::min);
    let seed = if seed.is_finite() { 1.0 / seed } else { 1.0 };
    let bracket = bracket_increasing(phi, seed, 200)?;
    if bracket.lo == bracket.hi {
        return Ok(bracket.lo);
    }
    brent(phi, bracket, 0.0, 1e-12, 200)
}
