//! Linearized fluctuations around the masing fixed point and the phase
//! diffusion they imply.
//!
//! Coordinates are the real 6-vector (δN_e, δN_g, Re δS₋, Im δS₋, Re δa, Im δa).
//! The drift matrix is the linearization of the operator Langevin equations
//! at the mean-field steady state. The diffusion matrix holds the symmetrized
//! noise correlators, built from generalized Einstein relations:
//!
//! * populations: shot noise of pump and relaxation jumps,
//!   D_ee = D_gg = −D_eg = wN_g + γN_e;
//! * collective spin: ⟨F_S†F_S⟩ = κ_sN_e + (wN_g − γN_e) and
//!   ⟨F_S F_S†⟩ = κ_sN_g − (wN_g − γN_e), i.e. κ_sN/4 per quadrature;
//! * cavity: ⟨F_c F_c†⟩ = κ_c(n_th + 1), ⟨F_c†F_c⟩ = κ_c n_th, i.e.
//!   κ_c(2n_th + 1)/4 per quadrature.
//!
//! N_e + N_g is conserved, so the analysis works on the 5-dimensional
//! fixed-N subspace (δN_e = −δN_g). There the U(1) phase symmetry leaves
//! exactly one neutral (Goldstone) mode; projecting the diffusion onto its
//! left eigenvector gives the phase-diffusion rate, which equals the FWHM of
//! the Lorentzian maser line.
//!
//! The linear algebra runs in `f64` whatever the scalar type of the inputs.

use std::io::{self, Write};

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{MaserError, Result};
use crate::meanfield::MeanFieldState;
use crate::params::{DerivedRates, SystemParams};
use crate::scalar::Real;

type M5 = SMatrix<f64, 5, 5>;
type V5 = SVector<f64, 5>;

/// Eigenvalues within this fraction of κ_c count as neutral.
pub const GOLDSTONE_RATE_FRACTION: f64 = 1e-3;

/// Minimum |cos| between the neutral eigenvector and the phase rotation.
pub const GOLDSTONE_OVERLAP: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSystem<T> {
    pub drift_matrix: [[T; 6]; 6],
    pub diffusion_matrix: [[T; 6]; 6],
    /// Infinitesimal global phase rotation of the steady state,
    /// (0, 0, Re iS₋, Im iS₋, Re ia, Im ia).
    pub phase_generator: [T; 6],
    /// Natural magnitudes (N, |S₋|, |a|) used to balance the matrices.
    pub scales: [T; 3],
    pub kappa_c: T,
}

/// Builds drift and diffusion at a mean-field state. Non-masing states are
/// accepted (amplitudes zero); they simply have no phase mode.
pub fn build_fluctuation_system<T: Real>(
    state: &MeanFieldState<T>,
    rates: &DerivedRates<T>,
    params: &SystemParams<T>,
) -> Result<FluctuationSystem<T>> {
    let z = T::zero();
    let two = T::two();
    let four = T::lit(4.0);
    let half = T::half();
    let g = params.coupling_g;
    let (w, gamma) = (params.pump_rate_w, params.gamma_eg);
    let (ks, kc) = (rates.kappa_s, rates.kappa_c);
    let (ar, ai) = (state.a.re, state.a.im);
    let (sr, si) = (state.s_minus.re, state.s_minus.im);
    let s_z = state.s_z;
    // Frame rotating at the operating frequency; both offsets vanish on resonance.
    let ds = state.omega_mase - params.omega_s;
    let dc = state.omega_mase - params.omega_c;

    let drift = [
        [-gamma, w, two * g * ai, -two * g * ar, -two * g * si, two * g * sr],
        [gamma, -w, -two * g * ai, two * g * ar, two * g * si, -two * g * sr],
        [-g * ai, g * ai, -ks * half, -ds, z, -g * s_z],
        [g * ar, -g * ar, ds, -ks * half, g * s_z, z],
        [z, z, z, g, -kc * half, -dc],
        [z, z, -g, z, dc, -kc * half],
    ];

    let (n_e, n_g) = (state.n_e, state.n_g);
    let jumps = w * n_g + gamma * n_e;
    let net_pump = w * n_g - gamma * n_e;
    let spin_normal = ks * n_e + net_pump;
    let spin_anti = ks * n_g - net_pump;
    let spin_quadrature = (spin_normal + spin_anti) / four;
    let cavity_quadrature = (kc * (rates.n_th + T::one()) + kc * rates.n_th) / four;
    let mut diffusion = [[z; 6]; 6];
    diffusion[0][0] = jumps;
    diffusion[1][1] = jumps;
    diffusion[0][1] = -jumps;
    diffusion[1][0] = -jumps;
    diffusion[2][2] = spin_quadrature;
    diffusion[3][3] = spin_quadrature;
    diffusion[4][4] = cavity_quadrature;
    diffusion[5][5] = cavity_quadrature;

    let d64 = SMatrix::<f64, 6, 6>::from_fn(|i, j| diffusion[i][j].as_f64());
    let norm = d64.abs().max();
    let min_eig = d64.symmetric_eigenvalues().min();
    if !(min_eig.is_finite() && min_eig >= -1e-10 * norm) {
        return Err(MaserError::NonPsdDiffusion { min_eigenvalue: min_eig });
    }

    let unit = |v: T| if v > z { v } else { T::one() };
    Ok(FluctuationSystem {
        drift_matrix: drift,
        diffusion_matrix: diffusion,
        phase_generator: [z, z, -si, sr, -ai, ar],
        scales: [params.n_spins, unit(state.s_minus.norm()), unit(state.a.norm())],
        kappa_c: kc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSpectrum {
    /// Drift eigenvalues on the fixed-N subspace, 1/s.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Index of the phase mode in `eigenvalues`.
    pub goldstone: Option<usize>,
    /// |cos| between the most neutral eigenvector and the phase rotation.
    pub phase_overlap: f64,
}

impl FluctuationSpectrum {
    /// All eigenvalues except the phase mode have negative real part.
    pub fn stable_apart_from_goldstone(&self) -> bool {
        self.eigenvalues
            .iter()
            .enumerate()
            .all(|(i, l)| Some(i) == self.goldstone || l.re < 0.0)
    }

    pub fn neutral_count(&self, kappa_c: f64) -> usize {
        self.eigenvalues
            .iter()
            .filter(|l| l.norm() < GOLDSTONE_RATE_FRACTION * kappa_c)
            .count()
    }
}

/// Reduced, balanced matrices: basis (δm, Re δS₋, Im δS₋, Re δa, Im δa) with
/// δN_e = δm, δN_g = −δm, each coordinate divided by its natural magnitude.
struct Reduced {
    drift: M5,
    diffusion: M5,
    phase: V5,
    /// reduced-balanced → physical 6-vector
    embed: SMatrix<f64, 6, 5>,
}

impl<T: Real> FluctuationSystem<T> {
    fn reduced(&self) -> Reduced {
        let a = SMatrix::<f64, 6, 6>::from_fn(|i, j| self.drift_matrix[i][j].as_f64());
        let d = SMatrix::<f64, 6, 6>::from_fn(|i, j| self.diffusion_matrix[i][j].as_f64());
        let v = SVector::<f64, 6>::from_fn(|i, _| self.phase_generator[i].as_f64());
        let [n, s, f] = self.scales.map(|x| x.as_f64());
        let sc = [n, s, s, f, f];

        let mut embed = SMatrix::<f64, 6, 5>::zeros();
        embed[(0, 0)] = sc[0];
        embed[(1, 0)] = -sc[0];
        for k in 1..5 {
            embed[(k + 1, k)] = sc[k];
        }
        let mut project = SMatrix::<f64, 5, 6>::zeros();
        project[(0, 0)] = 0.5 / sc[0];
        project[(0, 1)] = -0.5 / sc[0];
        for k in 1..5 {
            project[(k, k + 1)] = 1.0 / sc[k];
        }
        Reduced {
            drift: project * a * embed,
            diffusion: project * d * project.transpose(),
            phase: project * v,
            embed,
        }
    }

    pub fn spectrum(&self) -> FluctuationSpectrum {
        let red = self.reduced();
        let eigenvalues: Vec<Complex<f64>> = red.drift.complex_eigenvalues().iter().copied().collect();
        let kc = self.kappa_c.as_f64();
        let (idx, lambda) = eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .map(|(i, l)| (i, *l))
            .expect("five eigenvalues");

        let phase_norm = red.phase.norm();
        let overlap = if phase_norm > 0.0 {
            let right = neutral_vectors(&red.drift, lambda.re).0;
            (right.dot(&red.phase) / (right.norm() * phase_norm)).abs()
        } else {
            0.0
        };
        let goldstone = (lambda.norm() < GOLDSTONE_RATE_FRACTION * kc && overlap > GOLDSTONE_OVERLAP).then_some(idx);
        FluctuationSpectrum {
            eigenvalues,
            goldstone,
            phase_overlap: overlap,
        }
    }

    /// Phase-diffusion rate D_φ = uᵀDu/(uᵀv)², with u the left neutral
    /// eigenvector and v the phase rotation. The maser line is Lorentzian
    /// with FWHM D_φ (rad/s).
    pub fn phase_noise_linewidth(&self) -> Result<f64> {
        let spectrum = self.spectrum();
        let idx = spectrum.goldstone.ok_or(MaserError::NoGoldstoneMode)?;
        let red = self.reduced();
        let (_, left) = neutral_vectors(&red.drift, spectrum.eigenvalues[idx].re);
        let projection = left.dot(&red.phase);
        Ok((left.transpose() * red.diffusion * left)[(0, 0)] / (projection * projection))
    }

    /// Stationary covariance Σ of the physical 6-vector, from
    /// AΣ + ΣAᵀ + D = 0 on the fixed-N subspace. Fails when a neutral mode
    /// makes the fluctuations grow without bound.
    pub fn stationary_covariance(&self) -> Result<[[f64; 6]; 6]> {
        let red = self.reduced();
        let a = red.drift;
        let mut lyap = DMatrix::<f64>::zeros(25, 25);
        for i in 0..5 {
            for j in 0..5 {
                let row = i * 5 + j;
                for k in 0..5 {
                    lyap[(row, k * 5 + j)] += a[(i, k)];
                    lyap[(row, i * 5 + k)] += a[(j, k)];
                }
            }
        }
        let rhs = DMatrix::<f64>::from_fn(25, 1, |r, _| -red.diffusion[(r / 5, r % 5)]);
        let sol = lyap.lu().solve(&rhs).ok_or(MaserError::Singular)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(MaserError::Singular);
        }
        let sigma = M5::from_fn(|i, j| sol[(i * 5 + j, 0)]);
        let full = red.embed * sigma * red.embed.transpose();
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| full[(i, j)])))
    }
}

/// Right and left null vectors of A − λI (λ real), from the smallest
/// singular triplet.
fn neutral_vectors(drift: &M5, lambda: f64) -> (V5, V5) {
    let shifted = drift - M5::identity() * lambda;
    let svd = shifted.svd(true, true);
    let k = svd.singular_values.imin();
    let right = svd.v_t.expect("v_t requested").row(k).transpose();
    let left = svd.u.expect("u requested").column(k).into_owned();
    (right, left)
}

/// Normalized Lorentzian line S(Ω) = Δω/(Ω² + (Δω/2)²) at offset Ω from
/// the carrier, with ∫S dΩ/2π = 1.
pub fn lorentzian_line(linewidth: f64, offset: f64) -> f64 {
    linewidth / (offset * offset + 0.25 * linewidth * linewidth)
}

/// Writes `offset_rad_s,spectral_density` over `points` log-spaced offsets
/// in [lo, hi].
pub fn write_spectrum_csv<W: Write>(mut out: W, linewidth: f64, lo: f64, hi: f64, points: usize) -> io::Result<()> {
    writeln!(out, "offset_rad_s,spectral_density")?;
    let points = points.max(2);
    for k in 0..points {
        let omega = (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (points - 1) as f64).exp();
        writeln!(out, "{:e},{:e}", omega, lorentzian_line(linewidth, omega))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{coherence_time, SteadyMoments};
    use crate::meanfield::resonant_steady_state;
    use crate::params::derive_rates;

    fn system(p: &SystemParams<f64>) -> (FluctuationSystem<f64>, MeanFieldState<f64>, DerivedRates<f64>) {
        let r = derive_rates(p).unwrap();
        let mf = resonant_steady_state(p, &r);
        (build_fluctuation_system(&mf, &r, p).unwrap(), mf, r)
    }

    #[test]
    fn decoupled_cavity_modes() {
        let p = SystemParams {
            coupling_g: 0.0,
            ..SystemParams::nv_diamond()
        };
        let (sys, _, r) = system(&p);
        let cavity_block_eigs: Vec<f64> = sys.spectrum().eigenvalues.iter().map(|l| l.re).collect();
        let hits = cavity_block_eigs.iter().filter(|&&l| (l + r.kappa_c / 2.0).abs() < 1e-9 * r.kappa_c).count();
        assert_eq!(hits, 2);
        assert_eq!(sys.phase_noise_linewidth(), Err(MaserError::NoGoldstoneMode));
    }

    #[test]
    fn thermal_occupation_from_covariance() {
        let p = SystemParams {
            coupling_g: 0.0,
            ..SystemParams::nv_diamond()
        };
        let (sys, _, r) = system(&p);
        let sigma = sys.stationary_covariance().unwrap();
        let photons = sigma[4][4] + sigma[5][5] - 0.5;
        assert!((photons - r.n_th).abs() < 1e-10);
        let q = p.with_q(1e3);
        let (sys, _, r) = system(&SystemParams { temperature: 4.0, ..q });
        let sigma = sys.stationary_covariance().unwrap();
        assert!((sigma[4][4] + sigma[5][5] - 0.5 - r.n_th).abs() < 1e-9 * r.n_th);
    }

    #[test]
    fn cavity_noise_entries() {
        let (sys, _, r) = system(&SystemParams::nv_diamond());
        let expected = (r.kappa_c * (r.n_th + 1.0) + r.kappa_c * r.n_th) / 4.0;
        assert_eq!(sys.diffusion_matrix[4][4], expected);
        assert_eq!(sys.diffusion_matrix[5][5], expected);
        assert_eq!(sys.diffusion_matrix[4][5], 0.0);
    }

    #[test]
    fn goldstone_mode_at_reference_point() {
        let (sys, _, r) = system(&SystemParams::nv_diamond());
        let spec = sys.spectrum();
        let idx = spec.goldstone.expect("phase mode");
        assert!(spec.eigenvalues[idx].norm() < 1e-3 * r.kappa_c);
        assert!(spec.phase_overlap > 0.99);
        assert_eq!(spec.neutral_count(r.kappa_c), 1);
        assert!(spec.stable_apart_from_goldstone());
    }

    #[test]
    fn linewidth_matches_closed_form() {
        let p = SystemParams::nv_diamond();
        let (sys, mf, r) = system(&p);
        let rep = coherence_time(&SteadyMoments::from_mean_field(&mf), &r).unwrap();
        let lw = sys.phase_noise_linewidth().unwrap();
        assert!((lw / rep.linewidth - 1.0).abs() < 1e-3, "{lw:e} vs {:e}", rep.linewidth);
    }

    #[test]
    fn doubling_incoherent_population_doubles_diffusion() {
        let p = SystemParams::nv_diamond();
        let (sys, mf, r) = system(&p);
        let n_incoh = coherence_time(&SteadyMoments::from_mean_field(&mf), &r).unwrap().n_incoh;
        let r2 = DerivedRates {
            n_th: r.n_th + n_incoh,
            ..r
        };
        let sys2 = build_fluctuation_system(&mf, &r2, &p).unwrap();
        let ratio = sys2.phase_noise_linewidth().unwrap() / sys.phase_noise_linewidth().unwrap();
        assert!((ratio - 2.0).abs() < 2e-3);
    }

    #[test]
    fn negative_population_rejected() {
        let p = SystemParams::nv_diamond();
        let r = derive_rates(&p).unwrap();
        let mut mf = resonant_steady_state(&p, &r);
        mf.n_e = -1e15;
        mf.n_g = 0.0;
        assert!(matches!(build_fluctuation_system(&mf, &r, &p), Err(MaserError::NonPsdDiffusion { .. })));
    }

    #[test]
    fn lorentzian_half_maximum() {
        let lw = 3.0;
        let peak = lorentzian_line(lw, 0.0);
        assert!((lorentzian_line(lw, lw / 2.0) / peak - 0.5).abs() < 1e-15);
    }
}
