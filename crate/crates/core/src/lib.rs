pub mod coherence;
pub mod config;
pub mod constants;
pub mod cumulant;
pub mod error;
mod linalg;
pub mod meanfield;
pub mod params;
pub mod roots;
pub mod scalar;
pub mod sensing;
pub mod sweep;

pub use error::{MaserError, Result};
pub use scalar::Real;

pub type SystemParams = params::SystemParams<f64>;
pub type DerivedRates = params::DerivedRates<f64>;
pub type MeanFieldState = meanfield::MeanFieldState<f64>;
pub type CumulantState = cumulant::CumulantState<f64>;
pub type CoherenceReport = coherence::CoherenceReport<f64>;
pub type SensitivityReport = sensing::SensitivityReport<f64>;
pub type FluctuationSystem = coherence::FluctuationSystem<f64>;

pub type SystemParamsF32 = params::SystemParams<f32>;
pub type DerivedRatesF32 = params::DerivedRates<f32>;
pub type MeanFieldStateF32 = meanfield::MeanFieldState<f32>;
pub type CumulantStateF32 = cumulant::CumulantState<f32>;
pub type CoherenceReportF32 = coherence::CoherenceReport<f32>;
pub type SensitivityReportF32 = sensing::SensitivityReport<f32>;
