//! Key/value parameter files and command-line overrides.
//!
//! The file is TOML with one `key = value` line per parameter. Keys are the
//! [`SystemParams`] field names; the three frequencies may instead be given
//! in Hz with a `_hz` suffix (`coupling_g_hz = 0.02`), which is multiplied
//! by 2π. Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::error::{MaserError, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub n_spins: Option<f64>,
    pub coupling_g: Option<f64>,
    pub coupling_g_hz: Option<f64>,
    pub cavity_q: Option<f64>,
    pub pump_rate_w: Option<f64>,
    pub t2_star: Option<f64>,
    pub gamma_eg: Option<f64>,
    pub omega_s: Option<f64>,
    pub omega_s_hz: Option<f64>,
    pub omega_c: Option<f64>,
    pub omega_c_hz: Option<f64>,
    pub temperature: Option<f64>,
    pub cavity_length: Option<f64>,
}

fn angular(name: &str, rad: Option<f64>, hz: Option<f64>) -> Result<Option<f64>> {
    match (rad, hz) {
        (Some(_), Some(_)) => Err(MaserError::Config(format!("both `{name}` and `{name}_hz` given"))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(f)) => Ok(Some(TAU * f)),
        (None, None) => Ok(None),
    }
}

impl ParamOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| MaserError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MaserError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Overwrites the fields that are set and validates the result.
    pub fn apply(&self, base: SystemParams<f64>) -> Result<SystemParams<f64>> {
        let g = angular("coupling_g", self.coupling_g, self.coupling_g_hz)?;
        let ws = angular("omega_s", self.omega_s, self.omega_s_hz)?;
        let wc = angular("omega_c", self.omega_c, self.omega_c_hz)?;
        let p = SystemParams {
            n_spins: self.n_spins.unwrap_or(base.n_spins),
            coupling_g: g.unwrap_or(base.coupling_g),
            cavity_q: self.cavity_q.unwrap_or(base.cavity_q),
            pump_rate_w: self.pump_rate_w.unwrap_or(base.pump_rate_w),
            t2_star: self.t2_star.unwrap_or(base.t2_star),
            gamma_eg: self.gamma_eg.unwrap_or(base.gamma_eg),
            omega_s: ws.unwrap_or(base.omega_s),
            omega_c: wc.unwrap_or(base.omega_c),
            temperature: self.temperature.unwrap_or(base.temperature),
            cavity_length: self.cavity_length.unwrap_or(base.cavity_length),
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hz_keys_are_converted() {
        let o = ParamOverrides::from_toml_str("coupling_g_hz = 0.04\ncavity_q = 2e5\n").unwrap();
        let p = o.apply(SystemParams::nv_diamond()).unwrap();
        assert!((p.coupling_g - TAU * 0.04).abs() < 1e-15);
        assert_eq!(p.cavity_q, 2e5);
        assert_eq!(p.n_spins, 0.375e14);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(ParamOverrides::from_toml_str("q = 3"), Err(MaserError::Config(_))));
    }

    #[test]
    fn duplicate_units_rejected() {
        let o = ParamOverrides::from_toml_str("omega_c = 1e10\nomega_c_hz = 3e9").unwrap();
        assert!(matches!(o.apply(SystemParams::nv_diamond()), Err(MaserError::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let o = ParamOverrides::from_toml_str("t2_star = -1.0").unwrap();
        assert!(matches!(o.apply(SystemParams::nv_diamond()), Err(MaserError::InvalidParam { .. })));
    }

    #[test]
    fn later_overrides_win() {
        let file = ParamOverrides::from_toml_str("pump_rate_w = 2e5").unwrap();
        let cli = ParamOverrides {
            pump_rate_w: Some(3e5),
            ..Default::default()
        };
        let p = cli.apply(file.apply(SystemParams::nv_diamond()).unwrap()).unwrap();
        assert_eq!(p.pump_rate_w, 3e5);
    }
}
