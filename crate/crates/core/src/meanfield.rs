//! Mean-field steady states of the pumped spin ensemble coupled to the cavity.
//!
//! Above threshold the operators are replaced by their expectation values and
//! the steady-state equations are solved in closed form (resonant case) or by
//! a one-dimensional root search for the operating frequency (detuned case).
//! Below threshold mean-field theory has no spontaneous field, so the
//! amplitudes are exactly zero and the inversion follows the pump balance.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{derive_rates, DerivedRates, SystemParams};
use crate::roots::{bracketed_root, log_scan_max, RootOptions};
use crate::scalar::Real;

/// Why a state is (or is not) masing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Masing,
    /// w ≤ γ_eg: the pump cannot invert the ensemble.
    NoInversion,
    /// Inverted, but the cavity losses exceed the collective gain.
    BelowThreshold,
    /// The steady inversion κ_sκ_c/(4g²) would exceed N: the pump polarizes
    /// the spins faster than they can emit collectively.
    OverRepumped,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Masing => "masing",
            Regime::NoInversion => "no_inversion",
            Regime::BelowThreshold => "below_threshold",
            Regime::OverRepumped => "over_repumped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState<T> {
    pub masing: bool,
    pub regime: Regime,
    /// Population inversion S_z = N_e − N_g.
    pub s_z: T,
    /// Collective lowering amplitude S_−.
    pub s_minus: Complex<T>,
    /// Cavity field amplitude (real and non-negative by phase convention).
    pub a: Complex<T>,
    pub n_e: T,
    pub n_g: T,
    /// Operating (masing) frequency, rad/s.
    pub omega_mase: T,
}

impl<T: Real> MeanFieldState<T> {
    /// Coherent photon number |a|².
    pub fn photons(&self) -> T {
        self.a.norm_sqr()
    }

    /// ⟨S₊S₋⟩ in the mean-field factorization, |S_−|².
    pub fn spin_correlation(&self) -> T {
        self.s_minus.norm_sqr()
    }
}

/// The collective-gain inequality κ_c < (4g²/κ_s)·(w − γ_eg)/(w + γ_eg)·N.
pub fn masing_condition<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>) -> bool {
    let w = params.pump_rate_w;
    let gamma = params.gamma_eg;
    if w <= gamma || params.coupling_g <= T::zero() {
        return false;
    }
    let g2 = params.coupling_g * params.coupling_g;
    let gain = T::lit(4.0) * g2 / rates.kappa_s * (w - gamma) / (w + gamma) * params.n_spins;
    rates.kappa_c < gain
}

/// Weighted mean (κ_cω_s + κ_sω_c)/(κ_c + κ_s) the maser settles at.
pub fn masing_frequency<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>) -> T {
    (rates.kappa_c * params.omega_s + rates.kappa_s * params.omega_c) / (rates.kappa_c + rates.kappa_s)
}

fn pump_balance_numerator<T: Real>(params: &SystemParams<T>, s_z: T) -> T {
    let w = params.pump_rate_w;
    let gamma = params.gamma_eg;
    (w - gamma) * params.n_spins - (w + gamma) * s_z
}

fn incoherent_state<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>, regime: Regime) -> MeanFieldState<T> {
    let n = params.n_spins;
    let (w, gamma) = (params.pump_rate_w, params.gamma_eg);
    let s_z = if w + gamma > T::zero() {
        (n * (w - gamma) / (w + gamma)).max(-n).min(n)
    } else {
        -n
    };
    MeanFieldState {
        masing: false,
        regime,
        s_z,
        s_minus: Complex::new(T::zero(), T::zero()),
        a: Complex::new(T::zero(), T::zero()),
        n_e: (n + s_z) * T::half(),
        n_g: (n - s_z) * T::half(),
        omega_mase: masing_frequency(params, rates),
    }
}

fn classify<T: Real>(params: &SystemParams<T>, s_z: T, photons: T) -> Regime {
    if params.pump_rate_w <= params.gamma_eg {
        Regime::NoInversion
    } else if params.coupling_g <= T::zero() {
        Regime::BelowThreshold
    } else if s_z >= params.n_spins {
        Regime::OverRepumped
    } else if photons > T::zero() {
        Regime::Masing
    } else {
        Regime::BelowThreshold
    }
}

/// Closed-form steady state at ω_s = ω_c:
/// S_z = κ_sκ_c/(4g²), |a|² = ((w−γ)N − (w+γ)S_z)/(2κ_c), S_− = i·κ_c a/(2g).
///
/// The detuning carried by `rates` is ignored apart from the reported
/// operating frequency; use [`detuned_steady_state`] off resonance.
pub fn resonant_steady_state<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>) -> MeanFieldState<T> {
    let g = params.coupling_g;
    let s_z = if g > T::zero() {
        rates.kappa_s * rates.kappa_c / (T::lit(4.0) * g * g)
    } else {
        T::infinity()
    };
    let photons = pump_balance_numerator(params, s_z) / (T::two() * rates.kappa_c);
    let regime = classify(params, s_z, photons);
    if regime != Regime::Masing {
        return incoherent_state(params, rates, regime);
    }
    let n = params.n_spins;
    let s_minus_abs = (s_z * pump_balance_numerator(params, s_z) / (T::two() * rates.kappa_s)).sqrt();
    MeanFieldState {
        masing: true,
        regime,
        s_z,
        s_minus: Complex::new(T::zero(), s_minus_abs),
        a: Complex::new(photons.sqrt(), T::zero()),
        n_e: (n + s_z) * T::half(),
        n_g: (n - s_z) * T::half(),
        omega_mase: masing_frequency(params, rates),
    }
}

/// Solves the mean-field steady equations with ω_s ≠ ω_c.
///
/// Eliminating S_− through the field equation leaves the solvability
/// condition (i(ω−ω_s) − κ_s/2)(i(ω−ω_c) − κ_c/2) = g²S_z. Its imaginary part
/// fixes ω and is located by a bracketed root search on the offset ω − ω_c
/// in [min(0, Δ), max(0, Δ)]; its real part then gives S_z, and the
/// population equation gives |a|².
pub fn detuned_steady_state<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>) -> Result<MeanFieldState<T>> {
    let delta = params.omega_s - params.omega_c;
    let (kc, ks) = (rates.kappa_c, rates.kappa_s);
    let offset = if delta == T::zero() {
        T::zero()
    } else {
        // −2·Im(det) as a function of x = ω − ω_c.
        let phase_condition = |x: T| kc * (x - delta) + ks * x;
        bracketed_root(phase_condition, delta.min(T::zero()), delta.max(T::zero()), RootOptions::default())?
    };
    let omega = params.omega_c + offset;
    let g = params.coupling_g;
    let d_s = offset - delta;
    let d_c = offset;
    let s_z = if g > T::zero() {
        (ks * kc / T::lit(4.0) - d_s * d_c) / (g * g)
    } else {
        T::infinity()
    };
    let photons = pump_balance_numerator(params, s_z) / (T::two() * kc);
    let regime = classify(params, s_z, photons);
    if regime != Regime::Masing {
        let mut state = incoherent_state(params, rates, regime);
        state.omega_mase = omega;
        return Ok(state);
    }
    let a = photons.sqrt();
    let n = params.n_spins;
    Ok(MeanFieldState {
        masing: true,
        regime,
        s_z,
        s_minus: Complex::new(d_c, kc * T::half()) * (a / g),
        a: Complex::new(a, T::zero()),
        n_e: (n + s_z) * T::half(),
        n_g: (n - s_z) * T::half(),
        omega_mase: omega,
    })
}

/// Pump rates between which the gain inequality holds at fixed Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpWindow<T> {
    pub w_min: T,
    pub w_max: T,
}

impl<T: Real> PumpWindow<T> {
    pub fn contains(&self, w: T) -> bool {
        w > self.w_min && w < self.w_max
    }
}

/// Solves the masing condition for w with κ_s(w) = w + 2/T₂* + γ_eg.
///
/// The gain factor (w−γ)/((w+γ)(w+c)), c = 2/T₂* + γ, is unimodal with its
/// peak at w* = γ + √(2γ(γ+c)); each side of the peak is searched for the
/// threshold crossing. Returns `None` when the peak gain is already below
/// κ_c (e.g. Q too low) or when the spins are uncoupled.
pub fn masing_window<T: Real>(params: &SystemParams<T>) -> Result<Option<PumpWindow<T>>> {
    let rates = derive_rates(params)?;
    let g = params.coupling_g;
    if g <= T::zero() {
        return Ok(None);
    }
    let gamma = params.gamma_eg;
    let c = T::two() / params.t2_star + gamma;
    let gain_n = T::lit(4.0) * g * g * params.n_spins;
    let kc = rates.kappa_c;
    let excess = |w: T| gain_n * (w - gamma) / ((w + gamma) * (w + c)) - kc;

    let w_peak = gamma + (T::two() * gamma * (gamma + c)).sqrt();
    let peak_excess = if gamma == T::zero() {
        gain_n / c - kc
    } else {
        excess(w_peak)
    };
    if peak_excess <= T::zero() {
        return Ok(None);
    }
    let opts = RootOptions::default();
    let w_min = if gamma == T::zero() {
        T::zero()
    } else {
        bracketed_root(excess, gamma, w_peak, opts)?
    };
    let mut w_hi = (gain_n / kc).max(T::two() * w_peak);
    while excess(w_hi) > T::zero() {
        w_hi = w_hi * T::two();
    }
    let upper_lo = if gamma == T::zero() { w_hi * T::lit(1e-12) } else { w_peak };
    let w_max = bracketed_root(excess, upper_lo, w_hi, opts)?;
    Ok(Some(PumpWindow { w_min, w_max }))
}

/// ⟨S₊S₋⟩ = S_z((w−γ)N − (w+γ)S_z)/(2κ_s) at pump rate `w`, if masing.
pub fn spin_correlation_at<T: Real>(params: &SystemParams<T>, w: T) -> Option<T> {
    let p = params.with_pump(w);
    let rates = derive_rates(&p).ok()?;
    let state = resonant_steady_state(&p, &rates);
    state.masing.then(|| state.spin_correlation())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxCorrelationPump<T> {
    /// Strong-pump approximation 2Ng²/κ_c.
    pub analytic: T,
    /// Pump rate maximizing ⟨S₊S₋⟩ over the masing window, if one exists.
    pub numeric: Option<T>,
}

pub fn optimal_pump_max_correlation<T: Real>(params: &SystemParams<T>) -> Result<MaxCorrelationPump<T>> {
    let rates = derive_rates(params)?;
    let g2 = params.coupling_g * params.coupling_g;
    let analytic = T::two() * params.n_spins * g2 / rates.kappa_c;
    let numeric = match masing_window(params)? {
        Some(win) => {
            let (lo, hi) = interior(&win);
            log_scan_max(|w| spin_correlation_at(params, w).unwrap_or(T::nan()), lo, hi, 200).map(|(w, _)| w)
        }
        None => None,
    };
    Ok(MaxCorrelationPump { analytic, numeric })
}

/// Open interval slightly inside a window, usable on a log axis.
pub(crate) fn interior<T: Real>(win: &PumpWindow<T>) -> (T, T) {
    let eps = T::lit(1e-9);
    let lo = if win.w_min > T::zero() {
        win.w_min * (T::one() + eps)
    } else {
        win.w_max * T::lit(1e-12)
    };
    (lo, win.w_max * (T::one() - eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (SystemParams<f64>, DerivedRates<f64>) {
        let p = SystemParams::nv_diamond();
        let r = derive_rates(&p).unwrap();
        (p, r)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_point_masing() {
        let (p, r) = reference();
        assert!(masing_condition(&p, &r));
        let s = resonant_steady_state(&p, &r);
        assert!(s.masing);
        assert!(rel(s.s_z, 1.223e13) < 1e-3);
        assert!(rel(s.photons(), 6.70e12) < 1e-3);
        assert!(rel(s.spin_correlation() / s.s_z, 3.08e11) < 1e-3);
        assert!(rel(s.n_e + s.n_g, p.n_spins) < 1e-15);
        assert!(rel(s.n_e - s.n_g, s.s_z) < 1e-12);
        // S_− = i|S_−|, a real positive
        assert_eq!(s.s_minus.re, 0.0);
        assert!(s.s_minus.im > 0.0 && s.a.re > 0.0 && s.a.im == 0.0);
    }

    #[test]
    fn no_inversion_at_pump_equal_relaxation() {
        let (p, _) = reference();
        let p = p.with_pump(p.gamma_eg);
        let r = derive_rates(&p).unwrap();
        assert!(!masing_condition(&p, &r));
        let s = resonant_steady_state(&p, &r);
        assert_eq!(s.regime, Regime::NoInversion);
        assert_eq!(s.s_z, 0.0);
    }

    #[test]
    fn threshold_in_cavity_decay() {
        // 4g²N/κ_s·(w−γ)/(w+γ) evaluated by hand: 5.777e5 s⁻¹.
        let (p, r) = reference();
        let g2 = p.coupling_g * p.coupling_g;
        let kc_thr = 4.0 * g2 * p.n_spins / r.kappa_s * (p.pump_rate_w - p.gamma_eg) / (p.pump_rate_w + p.gamma_eg);
        assert!(rel(kc_thr, 5.78e5) < 1e-3);
        let below = |kc: f64| DerivedRates { kappa_c: kc, ..r };
        assert!(masing_condition(&p, &below(kc_thr * 0.999)));
        assert!(!masing_condition(&p, &below(kc_thr)));
        assert!(!masing_condition(&p, &below(kc_thr * 1.001)));
    }

    #[test]
    fn below_threshold_zero_amplitude() {
        let (p, _) = reference();
        let p = p.with_q(1e3).with_pump(0.06);
        let r = derive_rates(&p).unwrap();
        let s = resonant_steady_state(&p, &r);
        assert!(!s.masing);
        assert_eq!(s.photons(), 0.0);
        assert_eq!(s.spin_correlation(), 0.0);
        assert!(s.s_z.abs() < 0.1 * p.n_spins);
    }

    #[test]
    fn over_repumping_flagged() {
        let (p, _) = reference();
        let p = p.with_q(1e5).with_pump(3e7);
        let r = derive_rates(&p).unwrap();
        let s = resonant_steady_state(&p, &r);
        assert_eq!(s.regime, Regime::OverRepumped);
        assert!(s.s_z <= p.n_spins);
    }

    #[test]
    fn deep_pump_half_inversion() {
        // w = 2Ng²/κ_c with T₂* long enough that κ_s ≈ w.
        let (mut p, r) = reference();
        p.t2_star *= 1e3;
        let w = 2.0 * p.n_spins * p.coupling_g.powi(2) / r.kappa_c;
        let p = p.with_pump(w);
        let r = derive_rates(&p).unwrap();
        let s = resonant_steady_state(&p, &r);
        assert!(rel(s.s_z, p.n_spins / 2.0) < 1e-3);
        assert!(rel(s.spin_correlation(), p.n_spins.powi(2) / 8.0) < 2e-3);
    }

    #[test]
    fn detuned_reduces_to_resonant() {
        let (p, r) = reference();
        let a = resonant_steady_state(&p, &r);
        let b = detuned_steady_state(&p, &r).unwrap();
        assert_eq!(a.masing, b.masing);
        assert!(rel(b.s_z, a.s_z) < 1e-12);
        assert!(rel(b.photons(), a.photons()) < 1e-12);
        assert!((b.s_minus - a.s_minus).norm() / a.s_minus.norm() < 1e-12);
        assert_eq!(b.omega_mase, p.omega_c);
    }

    #[test]
    fn detuned_solution_satisfies_steady_equations() {
        let (mut p, _) = reference();
        p.omega_s = p.omega_c + 2.0e5;
        let r = derive_rates(&p).unwrap();
        let s = detuned_steady_state(&p, &r).unwrap();
        assert!(s.masing);
        let g = p.coupling_g;
        let i = Complex::new(0.0, 1.0);
        let ds = s.omega_mase - p.omega_s;
        let dc = s.omega_mase - p.omega_c;
        let spin = i * ds * s.s_minus - s.s_minus * (r.kappa_s / 2.0) + i * g * s.s_z * s.a;
        let field = i * dc * s.a - s.a * (r.kappa_c / 2.0) - i * g * s.s_minus;
        let pop = p.pump_rate_w * s.n_g - p.gamma_eg * s.n_e
            + (i * g * (s.a.conj() * s.s_minus - s.s_minus.conj() * s.a)).re;
        assert!(spin.norm() / (r.kappa_s * s.s_minus.norm()) < 1e-10);
        assert!(field.norm() / (r.kappa_c * s.a.norm()) < 1e-10);
        assert!(pop.abs() / (p.pump_rate_w * s.n_g) < 1e-10);
    }

    #[test]
    fn dragging_weights() {
        let (mut p, r) = reference();
        p.omega_s = p.omega_c + 1.0e5;
        let w = masing_frequency(&p, &r);
        // κ_c/(κ_c+κ_s) with κ_s/κ_c = 21.75
        let weight = (w - p.omega_c) / (p.omega_s - p.omega_c);
        assert!(rel(weight, 0.04396) < 1e-3);
    }

    #[test]
    fn dragging_midpoint_for_equal_decays() {
        let (mut p, r0) = reference();
        p.cavity_q = p.omega_c / r0.kappa_s;
        p.omega_s = p.omega_c + 3.0e4;
        let r = derive_rates(&p).unwrap();
        assert!(rel(r.kappa_c, r.kappa_s) < 1e-12);
        let s = detuned_steady_state(&p, &r).unwrap();
        let mid = 0.5 * (p.omega_s + p.omega_c);
        assert!(rel(s.omega_mase, mid) < 1e-12);
    }

    #[test]
    fn window_empty_for_low_q() {
        let (p, _) = reference();
        assert!(masing_window(&p.with_q(1e-3)).unwrap().is_none());
        assert!(masing_window(&p.with_q(1e3)).unwrap().is_none());
    }

    #[test]
    fn window_upper_edge_near_asymptote() {
        let (p, r) = reference();
        let win = masing_window(&p).unwrap().unwrap();
        let g2 = p.coupling_g.powi(2);
        let asymptote = 4.0 * g2 * p.n_spins / r.kappa_c;
        assert!(rel(asymptote, 1.26e7) < 5e-3);
        // Refined: (w−γ)/(w+γ) ≈ 1 leaves w_max ≈ 4g²N/κ_c − 2/T₂* − γ.
        assert!(rel(win.w_max, asymptote - 2.0 / p.t2_star - p.gamma_eg) < 1e-6);
        assert!(win.w_min > p.gamma_eg && win.w_min < 1.0);
    }

    #[test]
    fn window_agrees_with_condition_on_scan() {
        let (p, _) = reference();
        let win = masing_window(&p).unwrap().unwrap();
        for k in 0..100 {
            let w = 10f64.powf(-3.0 + 11.0 * k as f64 / 99.0);
            let q = p.with_pump(w);
            let r = derive_rates(&q).unwrap();
            assert_eq!(masing_condition(&q, &r), win.contains(w), "w = {w:e}");
        }
    }

    #[test]
    fn max_correlation_pump() {
        let (p, _) = reference();
        let opt = optimal_pump_max_correlation(&p).unwrap();
        assert!(rel(opt.analytic, 6.28e6) < 1e-3);
        let numeric = opt.numeric.unwrap();
        assert!(numeric / opt.analytic > 0.5 && numeric / opt.analytic < 2.0);

        let deep = SystemParams {
            t2_star: p.t2_star * 100.0,
            ..p
        };
        let opt = optimal_pump_max_correlation(&deep).unwrap();
        assert!(rel(opt.numeric.unwrap(), opt.analytic) < 0.05);
    }

    #[test]
    fn zero_relaxation_window_starts_at_zero() {
        let (p, _) = reference();
        let p = SystemParams { gamma_eg: 0.0, ..p };
        let win = masing_window(&p).unwrap().unwrap();
        assert_eq!(win.w_min, 0.0);
        assert!(win.w_max > 1e6);
    }
}
