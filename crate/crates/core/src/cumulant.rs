//! Second-order moment dynamics of the pumped spin–cavity system.
//!
//! The five moments ⟨N_e⟩, ⟨N_g⟩, ⟨a†S₋⟩, ⟨S₊S₋⟩ and ⟨a†a⟩ obey a closed set
//! of ODEs once the third-order correlators are factorized
//! (⟨a†a S_z⟩ ≈ ⟨a†a⟩⟨S_z⟩ and the like). Unlike mean-field theory they hold
//! both above and below threshold. Written in the frame rotating at the
//! common resonance frequency.
//!
//! The rates span about eight decades (γ_eg ~ 0.05 s⁻¹ up to κ_s ~ 4·10⁶ s⁻¹),
//! so the moments are integrated with an L-stable Rosenbrock 2(3) pair driven
//! by the analytic Jacobian.

use std::io::{self, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{MaserError, Result};
use crate::linalg::Lu;
use crate::meanfield::MeanFieldState;
use crate::params::{DerivedRates, SystemParams};
use crate::scalar::Real;

const DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantState<T> {
    /// ⟨N_e⟩
    pub n_e: T,
    /// ⟨N_g⟩
    pub n_g: T,
    /// ⟨a†S₋⟩; ⟨S₊a⟩ is its conjugate.
    pub a_dag_s: Complex<T>,
    /// ⟨S₊S₋⟩
    pub spsm: T,
    /// ⟨a†a⟩
    pub photons: T,
}

impl<T: Real> CumulantState<T> {
    pub fn s_z(&self) -> T {
        self.n_e - self.n_g
    }

    /// Incoherent fixed point of the pump: N_e = Nw/(w+γ_eg), a thermal
    /// cavity, and one single-spin term N_e in ⟨S₊S₋⟩ to seed the collective
    /// correlation.
    pub fn incoherent_seed(params: &SystemParams<T>, rates: &DerivedRates<T>) -> Self {
        let n = params.n_spins;
        let total = params.pump_rate_w + params.gamma_eg;
        let n_e = if total > T::zero() {
            n * params.pump_rate_w / total
        } else {
            T::zero()
        };
        CumulantState {
            n_e,
            n_g: n - n_e,
            a_dag_s: Complex::new(T::zero(), T::zero()),
            spsm: n_e,
            photons: rates.n_th,
        }
    }

    /// Moments of the mean-field solution (plus the thermal photons).
    pub fn from_mean_field(state: &MeanFieldState<T>, rates: &DerivedRates<T>) -> Self {
        CumulantState {
            n_e: state.n_e,
            n_g: state.n_g,
            a_dag_s: state.a.conj() * state.s_minus,
            spsm: state.spin_correlation(),
            photons: state.photons() + rates.n_th,
        }
    }

    fn to_array(self) -> [T; DIM] {
        [self.n_e, self.n_g, self.a_dag_s.re, self.a_dag_s.im, self.spsm, self.photons]
    }

    fn from_array(y: &[T; DIM]) -> Self {
        CumulantState {
            n_e: y[0],
            n_g: y[1],
            a_dag_s: Complex::new(y[2], y[3]),
            spsm: y[4],
            photons: y[5],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Coefficients<T> {
    w: T,
    gamma: T,
    g: T,
    kc: T,
    ks: T,
    n_th: T,
    finite_size: T,
}

impl<T: Real> Coefficients<T> {
    fn new(params: &SystemParams<T>, rates: &DerivedRates<T>) -> Self {
        Coefficients {
            w: params.pump_rate_w,
            gamma: params.gamma_eg,
            g: params.coupling_g,
            kc: rates.kappa_c,
            ks: rates.kappa_s,
            n_th: rates.n_th,
            finite_size: T::one() - T::one() / params.n_spins,
        }
    }

    fn rhs(&self, y: &[T; DIM]) -> [T; DIM] {
        let [n_e, n_g, c_re, c_im, spsm, n] = *y;
        let two = T::two();
        let s_z = n_e - n_g;
        // ig(⟨a†S₋⟩ − ⟨S₊a⟩) = −2g Im⟨a†S₋⟩
        let exchange = -two * self.g * c_im;
        let source = self.finite_size * spsm + n_e + n * s_z;
        let half_sum = (self.ks + self.kc) * T::half();
        [
            self.w * n_g - self.gamma * n_e + exchange,
            -self.w * n_g + self.gamma * n_e - exchange,
            -half_sum * c_re,
            -half_sum * c_im + self.g * source,
            -self.ks * spsm - s_z * exchange,
            -self.kc * n - exchange + self.kc * self.n_th,
        ]
    }

    /// ∂rhs/∂y, rows and columns ordered (N_e, N_g, Re C, Im C, ⟨S₊S₋⟩, n):
    ///
    /// ```text
    /// [ −γ        w      0     −2g       0          0   ]
    /// [  γ       −w      0      2g       0          0   ]
    /// [  0        0    −Σ/2     0        0          0   ]
    /// [ g(1+n)  −g·n     0    −Σ/2   g(1−1/N)    g·S_z  ]
    /// [ 2g·ImC −2g·ImC   0    2g·S_z    −κ_s        0   ]
    /// [  0        0      0      2g       0        −κ_c  ]
    /// ```
    /// with Σ = κ_s + κ_c and C = ⟨a†S₋⟩.
    fn jacobian(&self, y: &[T; DIM]) -> [[T; DIM]; DIM] {
        let [n_e, n_g, _, c_im, _, n] = *y;
        let z = T::zero();
        let two = T::two();
        let g = self.g;
        let s_z = n_e - n_g;
        let half_sum = (self.ks + self.kc) * T::half();
        [
            [-self.gamma, self.w, z, -two * g, z, z],
            [self.gamma, -self.w, z, two * g, z, z],
            [z, z, -half_sum, z, z, z],
            [g * (T::one() + n), -g * n, z, -half_sum, g * self.finite_size, g * s_z],
            [two * g * c_im, -two * g * c_im, z, two * g * s_z, -self.ks, z],
            [z, z, z, two * g, z, -self.kc],
        ]
    }
}

/// Time derivative of every moment.
pub fn cumulant_rhs<T: Real>(state: &CumulantState<T>, params: &SystemParams<T>, rates: &DerivedRates<T>) -> CumulantState<T> {
    CumulantState::from_array(&Coefficients::new(params, rates).rhs(&state.to_array()))
}

/// Analytic Jacobian of [`cumulant_rhs`] in the component order
/// (N_e, N_g, Re⟨a†S₋⟩, Im⟨a†S₋⟩, ⟨S₊S₋⟩, ⟨a†a⟩).
pub fn cumulant_jacobian<T: Real>(state: &CumulantState<T>, params: &SystemParams<T>, rates: &DerivedRates<T>) -> [[T; 6]; 6] {
    Coefficients::new(params, rates).jacobian(&state.to_array())
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    /// Relative local error tolerance.
    pub rel_tol: f64,
    /// Scaled residual below which the state counts as stationary.
    pub steady_tol: f64,
    /// Simulated-time budget, s.
    pub t_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-9,
            steady_tol: 1e-8,
            t_max: 1e5,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateRun<T> {
    pub state: CumulantState<T>,
    /// Simulated time at which stationarity was confirmed, s.
    pub t_final: T,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Final scaled residual, net of the rounding-error bound of ẏ.
    pub residual: T,
    /// max |N_e + N_g − N₀| / N over the run.
    pub population_drift: T,
}

struct Tolerances<T> {
    rel: T,
    abs: [T; DIM],
}

impl<T: Real> Tolerances<T> {
    fn new(params: &SystemParams<T>, rates: &DerivedRates<T>, rel_tol: f64) -> Self {
        let rel = T::lit(rel_tol);
        let n = params.n_spins;
        let scale = [n, n, n * n.sqrt(), n * n.sqrt(), n * n, rates.n_th + T::one()];
        Tolerances {
            rel,
            abs: scale.map(|s| s * rel),
        }
    }
}

/// Rosenbrock 2(3) pair of Shampine & Reichelt (the `ode23s` scheme) for the
/// autonomous moment system. One LU of W = I − h·d·J per step.
struct Rosenbrock23<T> {
    d: T,
    e32: T,
}

struct StepOutcome<T> {
    y: [T; DIM],
    f: [T; DIM],
    error: T,
}

impl<T: Real> Rosenbrock23<T> {
    fn new() -> Self {
        let sqrt2 = T::lit(2f64.sqrt());
        Rosenbrock23 {
            d: T::one() / (T::two() + sqrt2),
            e32: T::lit(6.0) + sqrt2,
        }
    }

    fn step(&self, sys: &Coefficients<T>, tol: &Tolerances<T>, y: &[T; DIM], f0: &[T; DIM], h: T) -> Result<StepOutcome<T>> {
        let jac = sys.jacobian(y);
        let mut w = [[T::zero(); DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                w[i][j] = -h * self.d * jac[i][j];
            }
            w[i][i] = w[i][i] + T::one();
        }
        let lu = Lu::factor(w)?;
        let half = T::half();
        let two = T::two();

        let k1 = lu.solve(f0);
        let y_mid: [T; DIM] = std::array::from_fn(|i| y[i] + half * h * k1[i]);
        let f1 = sys.rhs(&y_mid);
        let rhs2: [T; DIM] = std::array::from_fn(|i| f1[i] - k1[i]);
        let k2_part = lu.solve(&rhs2);
        let k2: [T; DIM] = std::array::from_fn(|i| k2_part[i] + k1[i]);
        let y_new: [T; DIM] = std::array::from_fn(|i| y[i] + h * k2[i]);
        let f2 = sys.rhs(&y_new);
        let rhs3: [T; DIM] =
            std::array::from_fn(|i| f2[i] - self.e32 * (k2[i] - f1[i]) - two * (k1[i] - f0[i]));
        let k3 = lu.solve(&rhs3);

        let sixth = h / T::lit(6.0);
        let mut error = T::zero();
        for i in 0..DIM {
            let e = sixth * (k1[i] - two * k2[i] + k3[i]);
            let sc = tol.abs[i] + tol.rel * y[i].abs().max(y_new[i].abs());
            error = error.max((e / sc).abs());
        }
        if y_new.iter().chain(f2.iter()).any(|v| !v.is_finite()) {
            error = T::infinity();
        }
        Ok(StepOutcome { y: y_new, f: f2, error })
    }
}

enum Stop<T> {
    Steady,
    At(T),
}

/// Stationarity measure max_i (|f_i| − e_i)⁺ / ((|y_i| + atol_i)·rate), where
/// e_i = 16ε(Σ_j |J_ij y_j| + |f_i − (Jy)_i|) bounds the rounding error of
/// evaluating f_i. Without the bound, states with strong cancellation
/// (S_z ≪ N_e) could never be certified stationary at small pump rates.
fn scaled_residual<T: Real>(sys: &Coefficients<T>, y: &[T; DIM], f: &[T; DIM], tol: &Tolerances<T>, rate: T) -> T {
    let jac = sys.jacobian(y);
    let eps = T::lit(16.0) * T::epsilon();
    let mut r = T::zero();
    for i in 0..DIM {
        let mut linear = T::zero();
        let mut magnitude = T::zero();
        for j in 0..DIM {
            linear = linear + jac[i][j] * y[j];
            magnitude = magnitude + (jac[i][j] * y[j]).abs();
        }
        let rounding = eps * (magnitude + (f[i] - linear).abs());
        let excess = (f[i].abs() - rounding).max(T::zero());
        r = r.max(excess / ((y[i].abs() + tol.abs[i]) * rate));
    }
    r
}

fn run<T: Real>(
    initial: &CumulantState<T>,
    params: &SystemParams<T>,
    rates: &DerivedRates<T>,
    opts: &IntegratorOptions,
    stop: Stop<T>,
    observer: &mut dyn FnMut(T, &CumulantState<T>),
) -> Result<SteadyStateRun<T>> {
    params.validate()?;
    let sys = Coefficients::new(params, rates);
    let tol = Tolerances::new(params, rates, opts.rel_tol);
    let method = Rosenbrock23::new();

    // Slowest population rate sets the residual scale; stationarity must
    // persist for min(1/γ_eg, 10³/κ_c).
    let pump_rate = params.pump_rate_w + params.gamma_eg;
    let rate = if pump_rate > T::zero() {
        pump_rate
    } else {
        rates.kappa_c.min(rates.kappa_s)
    };
    let hold = {
        let cap = T::lit(1e3) / rates.kappa_c;
        if params.gamma_eg > T::zero() {
            (T::one() / params.gamma_eg).min(cap)
        } else {
            cap
        }
    };
    let t_max = match stop {
        Stop::Steady => T::lit(opts.t_max),
        Stop::At(t_end) => t_end,
    };
    let steady_tol = T::lit(opts.steady_tol);

    let mut y = initial.to_array();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MaserError::NonFinite { t: 0.0 });
    }
    let total0 = y[0] + y[1];
    let mut f = sys.rhs(&y);
    let mut t = T::zero();
    let mut h = T::lit(1e-3) / (rates.kappa_s + rates.kappa_c);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut drift = T::zero();
    let mut steady_since: Option<T> = None;
    let mut residual = scaled_residual(&sys, &y, &f, &tol, rate);
    observer(t, &CumulantState::from_array(&y));

    loop {
        if let Stop::At(t_end) = stop {
            if t >= t_end {
                break;
            }
            h = h.min(t_end - t);
        }
        if accepted + rejected >= opts.max_steps {
            return Err(MaserError::TooManySteps(opts.max_steps));
        }
        let out = method.step(&sys, &tol, &y, &f, h)?;
        if out.error <= T::one() {
            t = t + h;
            y = out.y;
            f = out.f;
            accepted += 1;
            drift = drift.max(((y[0] + y[1]) - total0).abs() / params.n_spins);
            observer(t, &CumulantState::from_array(&y));

            residual = scaled_residual(&sys, &y, &f, &tol, rate);
            if let Stop::Steady = stop {
                if residual < steady_tol {
                    let since = *steady_since.get_or_insert(t);
                    if t - since >= hold {
                        return Ok(SteadyStateRun {
                            state: CumulantState::from_array(&y),
                            t_final: t,
                            accepted_steps: accepted,
                            rejected_steps: rejected,
                            residual,
                            population_drift: drift,
                        });
                    }
                } else {
                    steady_since = None;
                }
                if t >= t_max {
                    return Err(MaserError::SteadyStateNotReached {
                        t_max: t_max.as_f64(),
                        residual: residual.as_f64(),
                    });
                }
            }
        } else {
            rejected += 1;
        }
        let factor = if out.error.is_finite() {
            if out.error == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.8) * out.error.powf(T::lit(-1.0 / 3.0))).max(T::lit(0.2)).min(T::lit(5.0))
            }
        } else {
            T::lit(0.1)
        };
        h = h * factor;
        if h <= T::epsilon() * t.max(T::one() / (rates.kappa_s + rates.kappa_c)) {
            if out.error.is_finite() {
                return Err(MaserError::StepSizeUnderflow { t: t.as_f64() });
            }
            return Err(MaserError::NonFinite { t: t.as_f64() });
        }
    }
    Ok(SteadyStateRun {
        state: CumulantState::from_array(&y),
        t_final: t,
        accepted_steps: accepted,
        rejected_steps: rejected,
        residual,
        population_drift: drift,
    })
}

/// Integrates until the scaled residual max_i |ẏ_i| / ((|y_i| + atol_i)(w + γ_eg)),
/// net of rounding error, stays below `opts.steady_tol` for min(1/γ_eg, 10³/κ_c) of simulated time.
pub fn integrate_to_steady_state<T: Real>(
    initial: &CumulantState<T>,
    params: &SystemParams<T>,
    rates: &DerivedRates<T>,
    opts: &IntegratorOptions,
) -> Result<SteadyStateRun<T>> {
    run(initial, params, rates, opts, Stop::Steady, &mut |_, _| {})
}

/// Integrates to steady state, handing every accepted step to `observer`.
pub fn integrate_to_steady_state_observed<T: Real>(
    initial: &CumulantState<T>,
    params: &SystemParams<T>,
    rates: &DerivedRates<T>,
    opts: &IntegratorOptions,
    observer: &mut dyn FnMut(T, &CumulantState<T>),
) -> Result<SteadyStateRun<T>> {
    run(initial, params, rates, opts, Stop::Steady, observer)
}

/// Integrates over a fixed interval [0, t_end].
pub fn integrate_for<T: Real>(
    initial: &CumulantState<T>,
    params: &SystemParams<T>,
    rates: &DerivedRates<T>,
    t_end: T,
    opts: &IntegratorOptions,
    observer: &mut dyn FnMut(T, &CumulantState<T>),
) -> Result<SteadyStateRun<T>> {
    run(initial, params, rates, opts, Stop::At(t_end), observer)
}

/// n_incoh = n_th + N_e/S_z.
pub fn incoherent_magnon_number<T: Real>(state: &CumulantState<T>, n_th: T) -> Result<T> {
    let s_z = state.s_z();
    if !(s_z > T::zero()) {
        return Err(MaserError::NonPositiveInversion(s_z.as_f64()));
    }
    Ok(n_th + state.n_e / s_z)
}

/// Writes `t,n_e,n_g,re_a_dag_s,im_a_dag_s,spsm,photons` rows.
pub fn write_trajectory_csv<T: Real, W: Write>(mut out: W, samples: &[(T, CumulantState<T>)]) -> io::Result<()> {
    writeln!(out, "t,n_e,n_g,re_a_dag_s,im_a_dag_s,spsm,photons")?;
    for (t, s) in samples {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            t, s.n_e, s.n_g, s.a_dag_s.re, s.a_dag_s.im, s.spsm, s.photons
        )?;
    }
    Ok(())
}
