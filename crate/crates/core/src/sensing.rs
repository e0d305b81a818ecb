//! Magnetometry and mirror-position sensitivities of a free-running maser.
//!
//! A field shift δB moves the spin frequency by γδB, a mirror shift δx moves
//! the cavity frequency by ω_cδx/L. Frequency dragging passes only the
//! fraction κ_c/(κ_c + κ_s) (spin) or κ_s/(κ_c + κ_s) (cavity) of that shift
//! to the maser line, and the line itself can be split to √(2/T_coh) per √s.
//! All quantities are SI: tesla·√s and meter·√s.

use serde::{Deserialize, Serialize};

use crate::constants::GAMMA_NV;
use crate::error::{MaserError, Result};
use crate::params::{DerivedRates, SystemParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport<T> {
    /// δB√t_m, T·√s (numerically T/√Hz).
    pub db_sqrt_t: T,
    /// δx√t_m, m·√s.
    pub dx_sqrt_t: T,
    /// Gyromagnetic ratio used, rad/(s·T).
    pub gamma_nv: T,
    /// Signal band (κ_c + κ_s)/2, rad/s.
    pub bandwidth: T,
}

fn frequency_resolution<T: Real>(t_coh: T) -> Result<T> {
    if t_coh.is_finite() && t_coh > T::zero() {
        Ok((T::two() / t_coh).sqrt())
    } else {
        Err(MaserError::NotMasing)
    }
}

/// δB√t_m with the NV gyromagnetic ratio.
pub fn magnetic_sensitivity<T: Real>(rates: &DerivedRates<T>, t_coh: T) -> Result<T> {
    magnetic_sensitivity_with(rates, t_coh, T::lit(GAMMA_NV))
}

/// δB√t_m for a spin species with gyromagnetic ratio `gamma` (rad/(s·T)).
pub fn magnetic_sensitivity_with<T: Real>(rates: &DerivedRates<T>, t_coh: T, gamma: T) -> Result<T> {
    let resolution = frequency_resolution(t_coh)?;
    Ok((T::one() + rates.kappa_s / rates.kappa_c) * resolution / gamma)
}

/// δx√t_m for a cavity of length `params.cavity_length`.
pub fn position_sensitivity<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>, t_coh: T) -> Result<T> {
    let resolution = frequency_resolution(t_coh)?;
    Ok(params.cavity_length / params.omega_c * (T::one() + rates.kappa_c / rates.kappa_s) * resolution)
}

pub fn sensitivity_report<T: Real>(params: &SystemParams<T>, rates: &DerivedRates<T>, t_coh: T) -> Result<SensitivityReport<T>> {
    Ok(SensitivityReport {
        db_sqrt_t: magnetic_sensitivity(rates, t_coh)?,
        dx_sqrt_t: position_sensitivity(params, rates, t_coh)?,
        gamma_nv: T::lit(GAMMA_NV),
        bandwidth: (rates.kappa_c + rates.kappa_s) * T::half(),
    })
}
