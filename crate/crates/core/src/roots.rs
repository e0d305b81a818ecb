//! One-dimensional root finding and maximization.
//!
//! All problems solved here are monotone or unimodal on a known bracket, so
//! the routines favour guaranteed convergence: bisection with secant
//! acceleration for roots, golden-section search for maxima.

use crate::error::{MaserError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Finds a root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign
/// (or one of them vanish).
pub fn bracketed_root<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T, opts: RootOptions) -> Result<T> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(MaserError::NotBracketed {
            lo: a.as_f64(),
            hi: b.as_f64(),
            f_lo: fa.as_f64(),
            f_hi: fb.as_f64(),
        });
    }
    let tol = T::lit(opts.rel_tol);
    let tiny = T::min_positive_value();
    for iter in 0..opts.max_iter {
        let width = b - a;
        let scale = a.abs().max(b.abs());
        if width <= tol * scale || width <= tiny {
            return Ok(a - fa * width / (fb - fa));
        }
        // Secant on even iterations, plain bisection on odd ones: the bracket
        // at least halves every two steps whatever the secant does.
        let mid = a + width * T::half();
        let x = if iter % 2 == 0 {
            let s = a - fa * width / (fb - fa);
            if s > a && s < b && s.is_finite() {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        let fx = f(x);
        if fx == T::zero() {
            return Ok(x);
        }
        if !fx.is_finite() {
            return Err(MaserError::NoConvergence { iterations: iter });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Err(MaserError::NoConvergence {
        iterations: opts.max_iter,
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T, rel_tol: f64, max_iter: usize) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let tol = T::lit(rel_tol);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (a.abs() + b.abs()).max(T::one()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes `f` over `[lo, hi]` (both > 0) on a logarithmic axis: a coarse
/// scan of `points` samples locates the best cell, golden-section refines it.
/// Samples where `f` is not finite are treated as excluded. Returns `None`
/// when no sample is finite.
pub fn log_scan_max<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T, points: usize) -> Option<(T, T)> {
    let points = points.max(3);
    let (l0, l1) = (lo.ln(), hi.ln());
    let step = (l1 - l0) / T::lit((points - 1) as f64);
    let g = |u: T| {
        let v = f(u.exp());
        if v.is_finite() {
            v
        } else {
            T::neg_infinity()
        }
    };
    let mut best: Option<(usize, T)> = None;
    for i in 0..points {
        let v = g(l0 + step * T::lit(i as f64));
        if v.is_finite() && best.map_or(true, |(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    let (i, _) = best?;
    let a = l0 + step * T::lit(i.saturating_sub(1) as f64);
    let b = l0 + step * T::lit((i + 1).min(points - 1) as f64);
    let (u, v) = golden_section_max(g, a, b, 1e-12, 200);
    Some((u.exp(), v))
}
