//! Physical constants (CODATA 2018 exact/recommended values, SI units).

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;

/// NV-center gyromagnetic ratio, rad·s⁻¹·T⁻¹ (2π × 2.8 MHz/G).
pub const GAMMA_NV: f64 = 2.0 * std::f64::consts::PI * 2.8e10;

/// Largest accepted |ω_s − ω_c| / ω_c (rotating-wave regime).
pub const MAX_RELATIVE_DETUNING: f64 = 1e-3;
