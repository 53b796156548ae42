//! Bracketed scalar root finding: sign-change scans, bisection, Newton polish.
//!
//! The Newton stage runs in generic [`Scalar`] arithmetic so that roots of
//! parameter-dependent equations carry exact derivative payloads when invoked
//! with dual numbers.

use crate::error::{Error, Result};
use crate::scalar::{Dual, Scalar};

/// Sign-change brackets of `f` over `cells` uniform cells of `[lo, hi]`.
pub fn scan_brackets(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let h = (hi - lo) / cells as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=cells {
        let x1 = lo + h * i as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push((x0, x0));
        } else if f0 * f1 < 0.0 {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Shrink a sign-change bracket by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut flo = f(lo);
    if flo == 0.0 {
        return (lo, lo);
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, mid);
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    (lo, hi)
}

/// Root of `f` in a sign-change bracket: bisection to a safe seed, then Newton
/// polish in `S` arithmetic (derivative by a dual lift of `f` itself).
///
/// Converged when the primal residual drops below `f_tol` or the Newton step
/// below `x_tol` (relative); the step criterion matters when cancelled
/// differences put a noise floor under |f|. After primal convergence two more
/// full iterations settle the dual lanes of the root.
pub fn solve_bracketed<S: Scalar>(
    f: impl Fn(Dual<S>) -> Dual<S>,
    lo: f64,
    hi: f64,
    f_tol: f64,
    x_tol: f64,
) -> Result<S> {
    let fb = |x: f64| f(Dual::constant(S::from_f64(x))).re.base_f64();
    let (blo, bhi) = bisect(fb, lo, hi, 40);
    let mut x = S::from_f64(0.5 * (blo + bhi));
    let mut settled = 0;
    for _ in 0..60 {
        let y = f(Dual::variable(x, 0));
        let (fx, dfx) = (y.re, y.eps[0]);
        if dfx.base_f64() == 0.0 {
            return Err(Error::RootFinding(format!(
                "zero derivative at x = {}",
                x.base_f64()
            )));
        }
        let step = fx / dfx;
        let xn = x - step;
        // fall back to the bisection midpoint if Newton escapes the bracket
        x = if xn.base_f64() < lo || xn.base_f64() > hi {
            S::from_f64(0.5 * (blo + bhi))
        } else {
            xn
        };
        let done = fx.base_f64().abs() <= f_tol
            || step.base_f64().abs() <= x_tol * (1.0 + x.base_f64().abs());
        if done {
            settled += 1;
            if settled >= 3 {
                return Ok(x);
            }
        }
    }
    if settled > 0 {
        return Ok(x);
    }
    Err(Error::RootFinding(format!(
        "no convergence in [{lo}, {hi}] (f_tol {f_tol}, x_tol {x_tol})"
    )))
}
