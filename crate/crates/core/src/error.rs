use thiserror::Error;

pub type Result<T, E = MaserError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaserError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("root finder did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("root is not bracketed: f({lo:e}) = {f_lo:e}, f({hi:e}) = {f_hi:e}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("operation requires a masing state")]
    NotMasing,

    #[error("population inversion must be positive, got S_z = {0:e}")]
    NonPositiveInversion(f64),

    #[error("steady state not reached by t = {t_max:e} s (scaled residual {residual:e})")]
    SteadyStateNotReached { t_max: f64, residual: f64 },

    #[error("integration produced a non-finite value at t = {t:e} s")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t:e} s")]
    StepSizeUnderflow { t: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("singular matrix in linear solve")]
    Singular,

    #[error("diffusion matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NonPsdDiffusion { min_eigenvalue: f64 },

    #[error("no phase (Goldstone) mode in the fluctuation spectrum")]
    NoGoldstoneMode,

    #[error("config: {0}")]
    Config(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("output: {0}")]
    Io(String),
}

impl MaserError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        MaserError::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
