//! Physical configuration and the rates derived from it.
//!
//! Every frequency and rate is angular (rad/s, 1/s). Hz values are accepted
//! only at the config/CLI boundary.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B, MAX_RELATIVE_DETUNING};
use crate::error::{MaserError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    /// Number of spins coupled to the cavity mode, N.
    pub n_spins: T,
    /// Single spin–photon coupling g, rad/s.
    pub coupling_g: T,
    /// Loaded cavity quality factor.
    pub cavity_q: T,
    /// Incoherent pump rate w, 1/s.
    pub pump_rate_w: T,
    /// Ensemble dephasing time T₂*, s.
    pub t2_star: T,
    /// Spin relaxation rate γ_eg = 1/T₁, 1/s.
    pub gamma_eg: T,
    /// Spin transition frequency, rad/s.
    pub omega_s: T,
    /// Cavity mode frequency, rad/s.
    pub omega_c: T,
    /// Cavity temperature, K.
    pub temperature: T,
    /// Cavity length, m. Only the position sensitivity uses it.
    pub cavity_length: T,
}

/// Parameter sets of the NV-diamond maser at the three studied temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 120 mK, γ_eg = 0.05 s⁻¹.
    Fig3,
    /// 4 K, γ_eg = 0.05 s⁻¹.
    Fig4a,
    /// 300 K, γ_eg = 200 s⁻¹.
    Fig4b,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
        }
    }

    pub fn params<T: Real>(self) -> SystemParams<T> {
        let base = SystemParams::nv_diamond();
        match self {
            Preset::Fig3 => base,
            Preset::Fig4a => SystemParams {
                temperature: T::lit(4.0),
                ..base
            },
            Preset::Fig4b => SystemParams {
                temperature: T::lit(300.0),
                gamma_eg: T::lit(200.0),
                ..base
            },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = MaserError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig3" => Ok(Preset::Fig3),
            "fig4a" => Ok(Preset::Fig4a),
            "fig4b" => Ok(Preset::Fig4b),
            other => Err(MaserError::Config(format!("unknown preset `{other}`"))),
        }
    }
}

impl<T: Real> SystemParams<T> {
    /// NV ensemble in a 3 GHz Fabry–Pérot cavity at 120 mK, operated at
    /// Q = 10⁵ and w = 10⁵ s⁻¹.
    pub fn nv_diamond() -> Self {
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        let omega = two_pi * T::lit(3e9);
        SystemParams {
            n_spins: T::lit(0.375e14),
            coupling_g: two_pi * T::lit(0.02),
            cavity_q: T::lit(1e5),
            pump_rate_w: T::lit(1e5),
            t2_star: T::lit(0.5e-6),
            gamma_eg: T::lit(0.05),
            omega_s: omega,
            omega_c: omega,
            temperature: T::lit(0.12),
            cavity_length: T::lit(0.05),
        }
    }

    pub fn with_pump(self, pump_rate_w: T) -> Self {
        SystemParams { pump_rate_w, ..self }
    }

    pub fn with_q(self, cavity_q: T) -> Self {
        SystemParams { cavity_q, ..self }
    }

    pub fn detuning(&self) -> T {
        self.omega_s - self.omega_c
    }

    /// Checks the ranges every downstream formula relies on.
    ///
    /// The coupling, pump rate, relaxation rate and temperature may be zero
    /// (decoupled, unpumped, lossless and zero-temperature limits); the
    /// remaining quantities must be strictly positive.
    pub fn validate(&self) -> Result<()> {
        fn finite<T: Real>(name: &'static str, v: T) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(MaserError::param(name, format!("must be finite, got {v}")))
            }
        }
        fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
            finite(name, v)?;
            if v > T::zero() {
                Ok(())
            } else {
                Err(MaserError::param(name, format!("must be > 0, got {v}")))
            }
        }
        fn non_negative<T: Real>(name: &'static str, v: T) -> Result<()> {
            finite(name, v)?;
            if v >= T::zero() {
                Ok(())
            } else {
                Err(MaserError::param(name, format!("must be >= 0, got {v}")))
            }
        }

        finite("n_spins", self.n_spins)?;
        if self.n_spins < T::one() {
            return Err(MaserError::param("n_spins", format!("must be >= 1, got {}", self.n_spins)));
        }
        non_negative("coupling_g", self.coupling_g)?;
        positive("cavity_q", self.cavity_q)?;
        non_negative("pump_rate_w", self.pump_rate_w)?;
        positive("t2_star", self.t2_star)?;
        non_negative("gamma_eg", self.gamma_eg)?;
        positive("omega_s", self.omega_s)?;
        positive("omega_c", self.omega_c)?;
        non_negative("temperature", self.temperature)?;
        positive("cavity_length", self.cavity_length)?;

        let rel = (self.detuning() / self.omega_c).abs();
        if rel >= T::lit(MAX_RELATIVE_DETUNING) {
            return Err(MaserError::param(
                "omega_s",
                format!("relative detuning {rel:e} outside the rotating-wave regime (< {MAX_RELATIVE_DETUNING:e})"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates<T> {
    /// Cavity field decay κ_c = ω_c/Q, 1/s.
    pub kappa_c: T,
    /// Magnon decay κ_s = w + 2/T₂* + γ_eg, 1/s.
    pub kappa_s: T,
    /// Thermal photon occupation of the cavity mode.
    pub n_th: T,
    /// ω_s − ω_c, rad/s.
    pub detuning: T,
}

pub fn derive_rates<T: Real>(params: &SystemParams<T>) -> Result<DerivedRates<T>> {
    params.validate()?;
    Ok(DerivedRates {
        kappa_c: params.omega_c / params.cavity_q,
        kappa_s: params.pump_rate_w + T::two() / params.t2_star + params.gamma_eg,
        n_th: thermal_photons(params.omega_c, params.temperature)?,
        detuning: params.detuning(),
    })
}

/// Bose–Einstein occupation 1/(exp(ħω/k_BT) − 1); exactly 0 at T = 0.
pub fn thermal_photons<T: Real>(omega: T, temperature: T) -> Result<T> {
    if !(omega.is_finite() && omega > T::zero()) {
        return Err(MaserError::param("omega", format!("must be finite and > 0, got {omega}")));
    }
    if !(temperature.is_finite() && temperature >= T::zero()) {
        return Err(MaserError::param(
            "temperature",
            format!("must be finite and >= 0, got {temperature}"),
        ));
    }
    if temperature == T::zero() {
        return Ok(T::zero());
    }
    let x = T::lit(HBAR / K_B) * omega / temperature;
    Ok(T::one() / x.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn cavity_decay_is_angular() {
        let r = derive_rates(&SystemParams::<f64>::nv_diamond()).unwrap();
        assert!(rel(r.kappa_c, 1.885e5) < 1e-3);
        assert_eq!(r.kappa_c, 2.0 * std::f64::consts::PI * 3e9 / 1e5);
    }

    #[test]
    fn magnon_decay_sum() {
        let r = derive_rates(&SystemParams::<f64>::nv_diamond()).unwrap();
        assert!(rel(r.kappa_s, 4.1e6) < 5e-4);
        assert_eq!(r.kappa_s, 1e5 + 2.0 / 0.5e-6 + 0.05);
    }

    #[test]
    fn thermal_photon_values() {
        let w = 2.0 * std::f64::consts::PI * 3e9;
        assert!((thermal_photons(w, 0.12).unwrap() - 0.431).abs() < 5e-4);
        assert!((thermal_photons(w, 300.0).unwrap() - 2083.0).abs() < 0.5);
        assert_eq!(thermal_photons(w, 0.0).unwrap(), 0.0);
        let p = SystemParams::<f64> {
            temperature: 0.0,
            ..SystemParams::nv_diamond()
        };
        assert_eq!(derive_rates(&p).unwrap().n_th, 0.0);
    }

    #[test]
    fn thermal_photons_rejects_bad_input() {
        assert!(thermal_photons(0.0_f64, 1.0).is_err());
        assert!(thermal_photons(1.0_f64, -1.0).is_err());
        assert!(thermal_photons(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn validation_errors() {
        let base = SystemParams::<f64>::nv_diamond();
        let bad = [
            SystemParams { n_spins: 0.5, ..base },
            SystemParams { cavity_q: 0.0, ..base },
            SystemParams { t2_star: -1.0, ..base },
            SystemParams { pump_rate_w: f64::INFINITY, ..base },
            SystemParams { gamma_eg: -0.1, ..base },
            SystemParams { cavity_length: 0.0, ..base },
            SystemParams {
                omega_s: base.omega_c * 1.002,
                ..base
            },
        ];
        for p in bad {
            assert!(matches!(derive_rates(&p), Err(MaserError::InvalidParam { .. })), "{p:?}");
        }
        let ok = SystemParams {
            omega_s: base.omega_c * (1.0 + 5e-4),
            ..base
        };
        assert!(derive_rates(&ok).is_ok());
    }

    #[test]
    fn presets() {
        let p4b: SystemParams<f64> = Preset::Fig4b.params();
        assert_eq!(p4b.gamma_eg, 200.0);
        assert_eq!(p4b.temperature, 300.0);
        assert_eq!("FIG4A".parse::<Preset>().unwrap(), Preset::Fig4a);
        assert!("fig5".parse::<Preset>().is_err());
    }
}
