//! Bracketed scalar root finding.
//!
//! All solvers keep a sign-changing bracket at every step (Illinois-modified
//! regula falsi, falling back to bisection when the bracket shrinks slowly), so
//! they inherit the robustness of plain bisection on monotone functions.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finds `x ∈ [lo, hi]` with `f(x) = 0` for a monotone (or at least sign-changing) `f`.
///
/// Terminates once `|f(x)| ≤ ftol` or the bracket is narrower than `xtol`,
/// returning the endpoint with the smaller residual.
pub fn bracketed<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> Result<T> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::NotBracketed(format!(
            "f({:e})={:e}, f({:e})={:e}",
            lo, fa, hi, fb
        )));
    }
    let half = T::c(0.5);
    let mut side = 0i8;
    let mut last_width = b - a;
    for it in 0..max_iter {
        let width = (b - a).abs();
        if width <= xtol {
            break;
        }
        // every third step, force a bisection if the bracket did not halve
        let x = if it % 3 == 2 && width > half * last_width {
            last_width = width;
            a + half * (b - a)
        } else {
            if it % 3 == 2 {
                last_width = width;
            }
            let s = b - fb * (b - a) / (fb - fa);
            if s.is_finite() && s > a.min(b) && s < a.max(b) {
                s
            } else {
                a + half * (b - a)
            }
        };
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Numeric(format!("NaN residual at {:e}", x)));
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if (fx > T::zero()) == (fb > T::zero()) {
            b = x;
            fb = fx;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        } else {
            a = x;
            fa = fx;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Root of a monotone function of a positive scalar, searched in log space;
/// `xtol_rel` is the relative resolution in the scalar itself.
pub fn bracketed_log<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    xtol_rel: T,
    ftol: T,
    max_iter: usize,
) -> Result<T> {
    bracketed(
        |u: T| f(u.exp()),
        lo.ln(),
        hi.ln(),
        xtol_rel,
        ftol,
        max_iter,
    )
    .map(T::exp)
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    xtol: T,
    max_iter: usize,
) -> T {
    let g = T::c(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}
