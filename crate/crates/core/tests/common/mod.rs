//! Independent reference formulas, written from scratch for the tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const GAMMA_NV: f64 = TAU * 2.8e10;

#[derive(Clone, Copy, Debug)]
pub struct Point {
    pub n: f64,
    pub g: f64,
    pub q: f64,
    pub w: f64,
    pub t2: f64,
    pub gamma: f64,
    pub omega: f64,
    pub temp: f64,
    pub length: f64,
}

pub fn reference_point() -> Point {
    Point {
        n: 0.375e14,
        g: TAU * 0.02,
        q: 1e5,
        w: 1e5,
        t2: 0.5e-6,
        gamma: 0.05,
        omega: TAU * 3e9,
        temp: 0.12,
        length: 0.05,
    }
}

pub fn warm_point() -> Point {
    Point {
        temp: 300.0,
        gamma: 200.0,
        ..reference_point()
    }
}

pub fn n_thermal(omega: f64, temp: f64) -> f64 {
    if temp == 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temp);
    1.0 / (x.exp() - 1.0)
}

pub struct Closed {
    pub kc: f64,
    pub ks: f64,
    pub sz: f64,
    pub nc: f64,
    pub spsm: f64,
    pub ne: f64,
    pub t_coh: f64,
}

/// Resonant closed-form steady state and the incoherent-population
/// corrected coherence time. `nc <= 0` means no masing.
pub fn closed(p: &Point) -> Closed {
    let kc = p.omega / p.q;
    let ks = p.w + 2.0 / p.t2 + p.gamma;
    let sz = ks * kc / (4.0 * p.g * p.g);
    let excess = (p.w - p.gamma) * p.n - (p.w + p.gamma) * sz;
    let nc = excess / (2.0 * kc);
    let spsm = sz * excess / (2.0 * ks);
    let ne = (p.n + sz) / 2.0;
    let ns = spsm / sz;
    let n_incoh = n_thermal(p.omega, p.temp) + ne / sz;
    let t_coh = 4.0 * (1.0 / kc + 1.0 / ks) * (nc + ns) / n_incoh;
    Closed {
        kc,
        ks,
        sz,
        nc,
        spsm,
        ne,
        t_coh,
    }
}

/// Pump-rate edges of the gain inequality by plain bisection after a dense
/// log scan; `None` if the scan never sees gain.
pub fn window(p: &Point) -> Option<(f64, f64)> {
    let gain = |w: f64| {
        let ks = w + 2.0 / p.t2 + p.gamma;
        4.0 * p.g * p.g * p.n * (w - p.gamma) / ((w + p.gamma) * ks) - p.omega / p.q
    };
    let grid: Vec<f64> = (0..=4000).map(|k| 10f64.powf(-4.0 + 16.0 * k as f64 / 4000.0)).collect();
    let inside: Vec<usize> = (0..grid.len()).filter(|&k| gain(grid[k]) > 0.0).collect();
    let (first, last) = (*inside.first()?, *inside.last()?);
    let bisect = |mut lo: f64, mut hi: f64| {
        let rising = gain(hi) > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (gain(mid) > 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lo = if first == 0 { 0.0 } else { bisect(grid[first - 1], grid[first]) };
    let hi = bisect(grid[last + 1], grid[last]);
    Some((lo, hi))
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
