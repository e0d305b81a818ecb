//! Coherence time of the masing state.
//!
//! The primary route is the closed form
//! T_coh = 4(κ_c⁻¹ + κ_s⁻¹)(n_c + n_s)/n_incoh: the common phase is shared by
//! n_c photons and n_s = ⟨S₊S₋⟩/S_z magnons, and every incoherent quantum
//! (thermal photons plus N_e/S_z incoherent magnons) randomizes it.
//! [`fluctuation`] gives the independent route through the linearized
//! fluctuation equations and their phase-diffusion rate.
//!
//! Convention: T_coh = 2/Δω, with Δω the FWHM (rad/s) of the Lorentzian line.

pub mod fluctuation;

use serde::{Deserialize, Serialize};

use crate::cumulant::CumulantState;
use crate::error::{MaserError, Result};
use crate::meanfield::{interior, masing_window, resonant_steady_state, MeanFieldState};
use crate::params::{derive_rates, DerivedRates, SystemParams};
use crate::roots::log_scan_max;
use crate::scalar::Real;

pub use fluctuation::{build_fluctuation_system, lorentzian_line, FluctuationSpectrum, FluctuationSystem};

/// Steady-state moments entering the coherence time, from either solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyMoments<T> {
    pub masing: bool,
    pub s_z: T,
    pub n_e: T,
    /// ⟨a†a⟩
    pub photons: T,
    /// ⟨S₊S₋⟩
    pub spsm: T,
}

impl<T: Real> SteadyMoments<T> {
    pub fn from_mean_field(state: &MeanFieldState<T>) -> Self {
        SteadyMoments {
            masing: state.masing,
            s_z: state.s_z,
            n_e: state.n_e,
            photons: state.photons(),
            spsm: state.spin_correlation(),
        }
    }

    /// Cumulant moments; the masing classification comes from the mean-field
    /// solution of the same parameters.
    pub fn from_cumulant(state: &CumulantState<T>, mean_field: &MeanFieldState<T>) -> Self {
        SteadyMoments {
            masing: mean_field.masing,
            s_z: state.s_z(),
            n_e: state.n_e,
            photons: state.photons,
            spsm: state.spsm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport<T> {
    /// Photon number ⟨a†a⟩.
    pub n_c: T,
    /// Magnon number ⟨S₊S₋⟩/S_z.
    pub n_s: T,
    /// n_th + N_e/S_z.
    pub n_incoh: T,
    /// Coherence time, s.
    pub t_coh: T,
    /// FWHM linewidth 2/T_coh, rad/s.
    pub linewidth: T,
}

pub fn coherence_time<T: Real>(moments: &SteadyMoments<T>, rates: &DerivedRates<T>) -> Result<CoherenceReport<T>> {
    if !moments.masing {
        return Err(MaserError::NotMasing);
    }
    if !(moments.s_z > T::zero()) {
        return Err(MaserError::NonPositiveInversion(moments.s_z.as_f64()));
    }
    let n_c = moments.photons;
    let n_s = moments.spsm / moments.s_z;
    let n_incoh = rates.n_th + moments.n_e / moments.s_z;
    let lifetime_sum = T::one() / rates.kappa_c + T::one() / rates.kappa_s;
    let t_coh = T::lit(4.0) * lifetime_sum * (n_c + n_s) / n_incoh;
    Ok(CoherenceReport {
        n_c,
        n_s,
        n_incoh,
        t_coh,
        linewidth: T::two() / t_coh,
    })
}

/// Order-of-magnitude estimate (n_s + n_c)(τ_s + τ_c) with τ = 2/κ. It omits
/// the incoherent population, so it exceeds the full result by n_incoh/2.
pub fn heuristic_coherence_time<T: Real>(rates: &DerivedRates<T>, n_c: T, n_s: T) -> T {
    let tau_c = T::two() / rates.kappa_c;
    let tau_s = T::two() / rates.kappa_s;
    (n_c + n_s) * (tau_c + tau_s)
}

/// Mean-field coherence time at pump rate `w`, `None` outside the masing
/// region.
pub fn coherence_time_at_pump<T: Real>(params: &SystemParams<T>, w: T) -> Option<T> {
    let p = params.with_pump(w);
    let rates = derive_rates(&p).ok()?;
    let mf = resonant_steady_state(&p, &rates);
    coherence_time(&SteadyMoments::from_mean_field(&mf), &rates)
        .ok()
        .map(|r| r.t_coh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalCoherence<T> {
    /// 2Ng²/κ_c
    pub w_opt_analytic: T,
    /// 4N²g²/(3κ_c³)
    pub t_coh_opt_analytic: T,
    pub w_opt_numeric: Option<T>,
    pub t_coh_opt_numeric: Option<T>,
    /// κ_c/(2g²) divided by N·T₂*; the analytic pair assumes this is ≪ 1.
    pub limit_ratio: T,
    /// `limit_ratio` below [`OPTIMAL_LIMIT_RATIO`].
    pub limit_satisfied: bool,
}

/// Largest κ_c/(2g²NT₂*) for which the analytic optimum is trusted.
pub const OPTIMAL_LIMIT_RATIO: f64 = 0.05;

/// Analytic optimum of the coherence time over the pump rate together with
/// the numerical maximum of the closed form over the masing window.
pub fn optimal_coherence<T: Real>(params: &SystemParams<T>) -> Result<OptimalCoherence<T>> {
    let rates = derive_rates(params)?;
    let n = params.n_spins;
    let g2 = params.coupling_g * params.coupling_g;
    let kc = rates.kappa_c;
    let w_opt_analytic = T::two() * n * g2 / kc;
    let t_coh_opt_analytic = T::lit(4.0) * n * n * g2 / (T::lit(3.0) * kc * kc * kc);
    let limit_ratio = kc / (T::two() * g2) / (n * params.t2_star);

    let best = match masing_window(params)? {
        Some(win) => {
            let (lo, hi) = interior(&win);
            log_scan_max(|w| coherence_time_at_pump(params, w).unwrap_or(T::nan()), lo, hi, 400)
        }
        None => None,
    };
    Ok(OptimalCoherence {
        w_opt_analytic,
        t_coh_opt_analytic,
        w_opt_numeric: best.map(|b| b.0),
        t_coh_opt_numeric: best.map(|b| b.1),
        limit_ratio,
        limit_satisfied: limit_ratio < T::lit(OPTIMAL_LIMIT_RATIO),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn reference_report(p: &SystemParams<f64>) -> (CoherenceReport<f64>, DerivedRates<f64>) {
        let r = derive_rates(p).unwrap();
        let mf = resonant_steady_state(p, &r);
        (coherence_time(&SteadyMoments::from_mean_field(&mf), &r).unwrap(), r)
    }

    #[test]
    fn headline_coherence_times() {
        let (rep, _) = reference_report(&SystemParams::nv_diamond());
        assert!(rel(rep.t_coh, 6.3e7) < 0.01);
        assert_eq!(rep.t_coh * rep.linewidth, 2.0);
        let hot = crate::params::Preset::Fig4b.params::<f64>();
        let (rep, _) = reference_report(&hot);
        assert!(rel(rep.t_coh, 7.4e4) < 0.01);
    }

    #[test]
    fn inverse_in_incoherent_population() {
        let p = SystemParams::<f64>::nv_diamond();
        let r = derive_rates(&p).unwrap();
        let mf = resonant_steady_state(&p, &r);
        let m = SteadyMoments::from_mean_field(&mf);
        let base = coherence_time(&m, &r).unwrap();
        let r2 = DerivedRates {
            n_th: r.n_th + base.n_incoh,
            ..r
        };
        let doubled = coherence_time(&m, &r2).unwrap();
        assert!(rel(doubled.n_incoh, 2.0 * base.n_incoh) < 1e-15);
        assert!(rel(doubled.t_coh, base.t_coh / 2.0) < 1e-14);
    }

    #[test]
    fn closed_form_self_consistent() {
        let (rep, r) = reference_report(&SystemParams::nv_diamond());
        let again = 4.0 * (1.0 / r.kappa_c + 1.0 / r.kappa_s) * (rep.n_c + rep.n_s) / rep.n_incoh;
        assert!(rel(again, rep.t_coh) < 1e-15);
    }

    #[test]
    fn rejects_non_masing() {
        let p = SystemParams::<f64>::nv_diamond().with_q(1e3);
        let r = derive_rates(&p).unwrap();
        let mf = resonant_steady_state(&p, &r);
        assert_eq!(
            coherence_time(&SteadyMoments::from_mean_field(&mf), &r),
            Err(MaserError::NotMasing)
        );
    }

    #[test]
    fn heuristic_relation() {
        let (rep, r) = reference_report(&SystemParams::nv_diamond());
        let h = heuristic_coherence_time(&r, rep.n_c, rep.n_s);
        assert!(rel(h / rep.t_coh, rep.n_incoh / 2.0) < 1e-14);
        assert_eq!(heuristic_coherence_time(&r, 0.0, 0.0), 0.0);
        let bad_cavity = DerivedRates {
            kappa_c: f64::INFINITY,
            ..r
        };
        assert!(rel(heuristic_coherence_time(&bad_cavity, 3.0, 4.0), 7.0 * 2.0 / r.kappa_s) < 1e-15);
    }

    #[test]
    fn analytic_optimum() {
        let p = SystemParams::<f64>::nv_diamond();
        let opt = optimal_coherence(&p).unwrap();
        assert!(rel(opt.t_coh_opt_analytic, 4.4e9) < 0.01);
        assert!(rel(opt.w_opt_analytic, 6.28e6) < 1e-3);
        assert!(!opt.limit_satisfied);
        let twice_n = optimal_coherence(&SystemParams { n_spins: 2.0 * p.n_spins, ..p }).unwrap();
        assert!(rel(twice_n.t_coh_opt_analytic / opt.t_coh_opt_analytic, 4.0) < 1e-12);
        let twice_q = optimal_coherence(&p.with_q(2.0 * p.cavity_q)).unwrap();
        assert!(rel(twice_q.t_coh_opt_analytic / opt.t_coh_opt_analytic, 8.0) < 1e-12);
    }
}
