//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// A sign-changing bracket `f(lo) <= 0 <= f(hi)` (or the reverse).
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Grows a bracket around the positive root of an increasing function,
/// starting from `seed > 0` and doubling/halving at most `max_expansions` times.
pub fn bracket_increasing<F>(mut f: F, seed: f64, max_expansions: usize) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_seed = f(seed)?;
    if f_seed == 0.0 {
        return Ok(Bracket {
            lo: seed,
            hi: seed,
            f_lo: 0.0,
            f_hi: 0.0,
        });
    }
    let (mut lo, mut hi, mut f_lo, mut f_hi) = (seed, seed, f_seed, f_seed);
    for _ in 0..max_expansions {
        if f_lo == 0.0 || f_hi == 0.0 {
            let x = if f_lo == 0.0 { lo } else { hi };
            return Ok(Bracket {
                lo: x,
                hi: x,
                f_lo: 0.0,
                f_hi: 0.0,
            });
        }
        if f_lo < 0.0 && f_hi > 0.0 {
            return Ok(Bracket { lo, hi, f_lo, f_hi });
        }
        if f_hi <= 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = f(hi)?;
        } else {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = f(lo)?;
        }
    }
    if f_lo < 0.0 && f_hi > 0.0 {
        return Ok(Bracket { lo, hi, f_lo, f_hi });
    }
    Err(Error::NoBracket(format!(
        "no sign change after {max_expansions} expansions from {seed:e} (f = {f_lo:e} at {lo:e}, {f_hi:e} at {hi:e})"
    )))
}

/// Brent's method on a sign-changing bracket. Terminates when the bracket
/// width falls below `2 * eps * |x| + xtol/2`.
pub fn brent<F>(mut f: F, bracket: Bracket, xtol: f64, rtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let Bracket {
        lo: mut a,
        hi: mut b,
        f_lo: mut fa,
        f_hi: mut fb,
    } = bracket;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket(format!(
            "f({a:e}) = {fa:e} and f({b:e}) = {fb:e} have the same sign"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol.max(rtol * b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::RootNotConverged {
        iterations: max_iter,
        residual: fb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let br = bracket_increasing(f, 10.0, 100).unwrap();
        let root = brent(f, br, 0.0, 1e-14, 200).unwrap();
        assert!((root - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn bracket_grows_downwards() {
        let f = |x: f64| Ok(x - 1e-9);
        let br = bracket_increasing(f, 1.0, 200).unwrap();
        assert!(br.lo < 1e-9 && br.hi > 1e-9);
    }

    #[test]
    fn no_root_is_reported() {
        let f = |_x: f64| Ok(-1.0);
        assert!(matches!(bracket_increasing(f, 1.0, 50), Err(Error::NoBracket(_))));
    }
}
