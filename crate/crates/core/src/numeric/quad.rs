//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature.
//!
//! The interval with the largest error estimate is bisected until the total
//! error meets `max(abs_tol, rel_tol * |I|)`. Integrands with interior kinks
//! or jumps should be split at those points with [`Quadrature::integrate_pieces`];
//! endpoint singularities should be removed by a change of variables before
//! calling in here.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_606_515_300,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    // Too narrow to bisect further in floating point.
    exhausted: bool,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Exhausted segments sink to the bottom of the heap.
        let key = |s: &Segment| if s.exhausted { -1.0 } else { s.error };
        key(self).total_cmp(&key(other))
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv = [0.0; 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && roundoff > error {
        error = roundoff;
    }
    let width = (b - a).abs();
    let exhausted = width <= 4.0 * f64::EPSILON * (a.abs().max(b.abs())) || width == 0.0;
    Segment {
        a,
        b,
        value,
        error,
        exhausted,
    }
}

impl Quadrature {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_pieces(f, &[a, b])
    }

    /// Integrates over `points[0]..points[last]`, with the breakpoints in
    /// between seeding the subdivision. Points must be nondecreasing;
    /// zero-width pieces are skipped.
    pub fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<Estimate> {
        debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
        let mut heap = BinaryHeap::new();
        let mut evaluations = 0;
        for w in points.windows(2) {
            if w[1] > w[0] {
                heap.push(gauss_kronrod(&f, w[0], w[1]));
                evaluations += 21;
            }
        }
        if heap.is_empty() {
            return Ok(Estimate {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            });
        }
        loop {
            let value: f64 = heap.iter().map(|s| s.value).sum();
            let error: f64 = heap.iter().map(|s| s.error).sum();
            let tolerance = self.tolerance(value);
            if error <= tolerance {
                return Ok(Estimate {
                    value,
                    abs_error: error,
                    evaluations,
                });
            }
            let worst = *heap.peek().expect("heap is non-empty");
            if worst.exhausted || heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    estimate: value,
                    error,
                    tolerance,
                });
            }
            heap.pop();
            let mid = 0.5 * (worst.a + worst.b);
            heap.push(gauss_kronrod(&f, worst.a, mid));
            heap.push(gauss_kronrod(&f, mid, worst.b));
            evaluations += 42;
        }
    }

    /// Integrates over `[a, inf)` via `x = a + t / (1 - t)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Estimate> {
        let g = |t: f64| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        };
        self.integrate(g, 0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_and_kronrod_rules_are_exact_for_polynomials() {
        // Gauss 10-point is exact to degree 19 and Kronrod 21-point to degree 31,
        // so a typo in either table shows up here.
        for deg in [0_i32, 1, 5, 19] {
            let f = |x: f64| x.powi(deg);
            let half = 0.5;
            let mut gauss = 0.0;
            for j in (1..10).step_by(2) {
                let dx = half * XGK[j];
                gauss += WG[j / 2] * (f(half - dx) + f(half + dx));
            }
            gauss *= half;
            assert!((gauss - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "gauss deg {deg}");
        }
        for deg in [0_i32, 2, 20, 31] {
            let seg = gauss_kronrod(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!(
                (seg.value - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14,
                "kronrod deg {deg}"
            );
        }
    }

    #[test]
    fn smooth_integrals() {
        let q = Quadrature::default();
        let e = q.integrate(f64::sin, 0.0, std::f64::consts::PI).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        let e = q.integrate(|x| (-x * x).exp(), -10.0, 10.0).unwrap();
        assert!((e.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kink_handled_with_breakpoint() {
        let q = Quadrature::default();
        let e = q.integrate_pieces(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0]).unwrap();
        assert!((e.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite() {
        let q = Quadrature::default();
        let e = q.integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
        let e = q.integrate_to_infinity(|x| (-x).exp(), 2.0).unwrap();
        assert!((e.value - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity_converges() {
        let q = Quadrature::default();
        let e = q.integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let q = Quadrature {
            max_intervals: 3,
            ..Default::default()
        };
        match q.integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0) {
            Err(Error::Quadrature { error, .. }) => assert!(error > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_range() {
        let e = Quadrature::default().integrate(|x| x, 1.0, 1.0).unwrap();
        assert_eq!(e.value, 0.0);
    }
}
