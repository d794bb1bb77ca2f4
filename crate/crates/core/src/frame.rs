//! Diagonal rotating frame `U(t) = diag(e^{i(φ_k t + θ_k)})` that removes the
//! time dependence of the RTA Hamiltonian, and the eigensystem of the
//! resulting static matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::linalg::{cis, max_abs, Mat4, RealMat4, C64};
use crate::model::{PulseSpec, SpinSystem, Spectrum};

/// Tolerance on `Φ₁ + Φ₂ − Φ₃ − Φ₄ (mod 2π)` for user-supplied phases.
pub const PHASE_CLOSURE_TOL: f64 = 1e-9;
/// Absolute tolerance for residual time dependence of `H_rot`.
pub const STATIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("pulse phases violate Phi1 + Phi2 = Phi3 + Phi4 (mod 2pi): closure residual {residual:e}")]
    InconsistentPhases { residual: f64 },
    #[error("rotating-frame Hamiltonian is not static: variation {variation:e} exceeds {tolerance:e}")]
    NotStatic { variation: f64, tolerance: f64 },
    #[error("radicand B + C = {value:e} is negative")]
    ComplexRadical { value: f64 },
    #[error("negative or non-finite coupling amplitude")]
    InvalidAmplitude,
}

/// Frame rates `φ₁..φ₄` and offsets `θ₁..θ₄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameParams {
    pub phi: [f64; 4],
    pub theta: [f64; 4],
}

impl FrameParams {
    /// Residuals of the eight phase-matching relations, θ parts wrapped.
    pub fn residuals(&self, spec: &Spectrum, pulse_phases: &[f64; 4]) -> [f64; 8] {
        let (p, t, w, ph) = (&self.phi, &self.theta, &spec.omega_res, pulse_phases);
        [
            (p[2] - p[0]) - w[0],
            (p[3] - p[2]) - w[1],
            (p[1] - p[0]) - w[2],
            (p[3] - p[1]) - w[3],
            angle::wrap((t[2] - t[0]) - ph[0]),
            angle::wrap((t[3] - t[2]) - ph[1]),
            angle::wrap((t[1] - t[0]) - ph[2]),
            angle::wrap((t[3] - t[1]) - ph[3]),
        ]
    }

    /// Largest relation residual, with the rate residuals taken relative to
    /// the largest transition frequency.
    pub fn max_residual(&self, spec: &Spectrum, pulse_phases: &[f64; 4]) -> f64 {
        let scale = spec.omega_res.iter().fold(1.0_f64, |m, w| m.max(w.abs()));
        let r = self.residuals(spec, pulse_phases);
        let rates = r[..4].iter().fold(0.0_f64, |m, x| m.max(x.abs())) / scale;
        let phases = r[4..].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        rates.max(phases)
    }

    /// `U(t)` diagonal entries.
    pub fn diagonal(&self, t: f64) -> [C64; 4] {
        std::array::from_fn(|k| cis(self.phase_at(k, t)))
    }

    /// `φ_k t + θ_k`, reduced into (−π, π].
    pub fn phase_at(&self, k: usize, t: f64) -> f64 {
        angle::wrapped_sum(&[angle::phase_product(self.phi[k], t), angle::wrap(self.theta[k])])
    }

    /// `Θ_k = φ_k τ + θ_k` for all four levels.
    pub fn gate_phases(&self, tau: f64) -> [f64; 4] {
        std::array::from_fn(|k| self.phase_at(k, tau))
    }
}

/// `Φ₁ + Φ₂ − Φ₃ − Φ₄` wrapped.
pub fn phase_closure(pulse_phases: &[f64; 4]) -> f64 {
    angle::wrapped_sum(&[pulse_phases[0], pulse_phases[1], -pulse_phases[2], -pulse_phases[3]])
}

/// Frame parameters from the relations `φ₃−φ₁=Ω₁, φ₄−φ₃=Ω₂, φ₂−φ₁=Ω₃,
/// φ₄−φ₂=Ω₄` (and the same for θ with Φ), gauge `φ₁ = ε₁`, free `θ₁`.
pub fn solve_frame(spec: &Spectrum, pulse_phases: [f64; 4], theta1: f64) -> Result<FrameParams, FrameError> {
    let residual = phase_closure(&pulse_phases);
    if residual.abs() > PHASE_CLOSURE_TOL {
        return Err(FrameError::InconsistentPhases { residual });
    }
    Ok(frame_unchecked(spec, pulse_phases, theta1))
}

pub(crate) fn frame_unchecked(spec: &Spectrum, pulse_phases: [f64; 4], theta1: f64) -> FrameParams {
    let w = &spec.omega_res;
    let phi1 = spec.eps[0];
    let ph = &pulse_phases;
    FrameParams {
        phi: [phi1, phi1 + w[2], phi1 + w[0], phi1 + w[0] + w[1]],
        theta: [theta1, theta1 + ph[2], theta1 + ph[0], theta1 + ph[0] + ph[1]],
    }
}

/// `U H̃ U† − i U ∂U†/∂t` evaluated at one instant.
pub fn rotating_hamiltonian_at(sys: &SpinSystem, pulse: &PulseSpec, frame: &FrameParams, t: f64) -> Mat4 {
    let spec = Spectrum::of(sys);
    let couplings = pulse.rta_couplings(sys);
    let mut h = Mat4::zeros();
    for k in 0..4 {
        h[(k, k)] = C64::new(spec.eps[k] - frame.phi[k], 0.0);
    }
    // (row, col, carrier, coupling index): entry −(h/2) f_k(t) conjugated by U
    let slots = [(0usize, 1usize, 2usize), (0, 2, 0), (1, 3, 3), (2, 3, 1)];
    for &(r, c, k) in &slots {
        let hk = pulse.harmonics[k];
        let arg = angle::wrapped_sum(&[
            angle::phase_product(frame.phi[r] - frame.phi[c] + hk.omega, t),
            angle::wrap(frame.theta[r] - frame.theta[c]),
            hk.phi,
        ]);
        let v = cis(arg) * (-0.5 * couplings[k]);
        h[(r, c)] = v;
        h[(c, r)] = v.conj();
    }
    h
}

/// Static rotating-frame Hamiltonian; fails if it still depends on time.
pub fn rotate(sys: &SpinSystem, pulse: &PulseSpec, frame: &FrameParams) -> Result<Mat4, FrameError> {
    let horizon = if pulse.tau > 0.0 { pulse.tau } else { 1.0 };
    let times = [0.0, 0.37 * horizon, horizon];
    let h0 = rotating_hamiltonian_at(sys, pulse, frame, times[0]);
    let mut variation = 0.0_f64;
    for &t in &times[1..] {
        variation = variation.max(max_abs(&(rotating_hamiltonian_at(sys, pulse, frame, t) - h0)));
    }
    if variation > STATIC_TOL {
        return Err(FrameError::NotStatic { variation, tolerance: STATIC_TOL });
    }
    Ok(h0)
}

/// The real static matrix `H_rot` in terms of the four couplings.
pub fn static_rotating_matrix(h: [f64; 4]) -> RealMat4 {
    let (h1, h2, h3, h4) = (h[0] / 2.0, h[1] / 2.0, h[2] / 2.0, h[3] / 2.0);
    #[rustfmt::skip]
    let m = RealMat4::new(
        0.0, -h3, -h1, 0.0,
        -h3, 0.0, 0.0, -h4,
        -h1, 0.0, 0.0, -h2,
        0.0, -h4, -h2, 0.0,
    );
    m
}

/// Closed-form eigenvalues `(E₁, E₂, E₃, E₄)` for arbitrary couplings, with
/// `E₁ ≤ E₃ ≤ E₄ ≤ E₂`.
pub fn eigensystem_general(h: [f64; 4]) -> Result<[f64; 4], FrameError> {
    if h.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(FrameError::InvalidAmplitude);
    }
    let sq = h.map(|x| x * x);
    let a: f64 = sq.iter().sum();
    let b: f64 = sq.iter().map(|x| x * x).sum();
    let c = 8.0 * h[0] * h[1] * h[2] * h[3] + 2.0 * sq[0] * sq[1] + 2.0 * sq[0] * sq[2] - 2.0 * sq[0] * sq[3]
        - 2.0 * sq[1] * sq[2]
        + 2.0 * sq[1] * sq[3]
        + 2.0 * sq[2] * sq[3];
    let mut radicand = b + c;
    if radicand < 0.0 {
        if radicand < -1e-12 * a * a {
            return Err(FrameError::ComplexRadical { value: radicand });
        }
        radicand = 0.0;
    }
    let root = radicand.sqrt();
    let outer = ((a + root).max(0.0)).sqrt() * std::f64::consts::SQRT_2 / 4.0;
    let inner = ((a - root).max(0.0)).sqrt() * std::f64::consts::SQRT_2 / 4.0;
    Ok([-outer, outer, -inner, inner])
}

/// Eigenvalues and the `±1/2` coefficient matrix for `h₁ = h₄`, `h₂ = h₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotEigensystem {
    pub energies: [f64; 4],
    /// Row `j` holds the coefficients of eigenvector `|ψ_j⟩` on `|m_k⟩`.
    pub vectors: RealMat4,
}

impl RotEigensystem {
    /// Indices of `energies` in ascending order.
    pub fn ascending_order(&self) -> [usize; 4] {
        let mut idx = [0, 1, 2, 3];
        idx.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        idx
    }
}

/// Coefficient matrix shared by every symmetric coupling pair; it is its own
/// inverse.
pub fn coefficient_matrix() -> RealMat4 {
    #[rustfmt::skip]
    let c = RealMat4::new(
        1.0,  1.0,  1.0,  1.0,
        1.0, -1.0, -1.0,  1.0,
        1.0, -1.0,  1.0, -1.0,
        1.0,  1.0, -1.0, -1.0,
    ) * 0.5;
    c
}

pub fn eigensystem_symmetric(h1: f64, h2: f64) -> RotEigensystem {
    RotEigensystem {
        energies: [-(h1 + h2) / 2.0, (h1 + h2) / 2.0, -(h1 - h2) / 2.0, (h1 - h2) / 2.0],
        vectors: coefficient_matrix(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spectrum;
    use proptest::prelude::*;

    fn desk() -> SpinSystem {
        SpinSystem::new(500.0, 125.0, 1.0, 1.0, 0.25).unwrap()
    }

    fn sorted_numeric(h: [f64; 4]) -> Vec<f64> {
        let mut e: Vec<f64> = static_rotating_matrix(h).symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    #[test]
    fn zero_phases_reduce_to_energies() {
        let spec = spectrum(&desk()).unwrap();
        let f = solve_frame(&spec, [0.0; 4], 0.0).unwrap();
        assert_eq!(f.theta, [0.0; 4]);
        assert_eq!(f.phi, spec.eps);
    }

    #[test]
    fn closure_violation_rejected() {
        let spec = spectrum(&desk()).unwrap();
        let err = solve_frame(&spec, [0.1, 0.2, 0.3, 0.3], 0.0).unwrap_err();
        assert!(matches!(err, FrameError::InconsistentPhases { .. }));
    }

    #[test]
    fn random_consistent_phases_satisfy_relations() {
        let spec = spectrum(&desk()).unwrap();
        let mut x = 0.123_f64;
        for _ in 0..100 {
            x = (x * 7919.0 + 0.31).fract();
            let (a, b, c) = (6.0 * x - 3.0, (x * 13.0).fract() * 6.0 - 3.0, (x * 29.0).fract() * 6.0 - 3.0);
            let ph = [a, b, c, a + b - c];
            let f = solve_frame(&spec, ph, 0.7).unwrap();
            // substitute back into the eight relations
            assert!(f.residuals(&spec, &ph).iter().all(|r| r.abs() <= 1e-12));
            assert!(angle::distance(f.theta[3] - f.theta[1], a + b - c).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn frame_exists_iff_closure(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let spec = spectrum(&desk()).unwrap();
            let closes = angle::wrapped_sum(&[a, b, -c, -d]).abs() <= PHASE_CLOSURE_TOL;
            prop_assert_eq!(solve_frame(&spec, [a, b, c, d], 0.0).is_ok(), closes);
            prop_assert!(solve_frame(&spec, [a, b, c, a + b - c], 0.0).is_ok());
        }
    }

    fn valid_setup(phases: [f64; 4], amps: [f64; 4]) -> (SpinSystem, PulseSpec, FrameParams) {
        let sys = desk();
        let spec = spectrum(&sys).unwrap();
        let pulse = PulseSpec::resonant(&spec, phases, amps, 40.0).unwrap();
        let frame = solve_frame(&spec, phases, -0.4).unwrap();
        (sys, pulse, frame)
    }

    #[test]
    fn rotate_gives_static_zero_diagonal_matrix() {
        let (sys, pulse, frame) = valid_setup([0.3, -1.2, 0.5, 0.3 - 1.2 - 0.5], [0.1, 0.3, 0.3, 0.1]);
        let h = rotate(&sys, &pulse, &frame).unwrap();
        let hc = pulse.rta_couplings(&sys);
        let expect = static_rotating_matrix(hc);
        for r in 0..4 {
            for c in 0..4 {
                assert!((h[(r, c)] - C64::new(expect[(r, c)], 0.0)).norm() < 1e-12);
            }
            assert_eq!(h[(r, r)].re, 0.0);
        }
    }

    #[test]
    fn detuned_carrier_is_not_static() {
        let (sys, mut pulse, frame) = valid_setup([0.0; 4], [0.1, 0.3, 0.3, 0.1]);
        pulse.harmonics[0].omega += 1.0;
        assert!(matches!(rotate(&sys, &pulse, &frame), Err(FrameError::NotStatic { .. })));
    }

    #[test]
    fn rotate_matches_direct_numeric_transformation() {
        // oracle: U H̃ U† − iU ∂U†/∂t as explicit matrix products
        let (sys, pulse, frame) = valid_setup([0.9, 0.4, -0.2, 1.5], [0.2, 0.5, 0.5, 0.2]);
        let t = 0.37 * pulse.tau;
        let u = |t: f64| {
            let d = frame.diagonal(t);
            Mat4::from_diagonal(&crate::linalg::Vec4::from(d))
        };
        let htilde = crate::model::hamiltonian_rta(&sys, &pulse, t);
        let du_dag = Mat4::from_diagonal(&crate::linalg::Vec4::from(std::array::from_fn(|k| {
            C64::new(0.0, -frame.phi[k]) * cis(-(frame.phi[k] * t + frame.theta[k]))
        })));
        let oracle = u(t) * htilde * u(t).adjoint() - u(t) * du_dag * C64::new(0.0, 1.0);
        let h = rotate(&sys, &pulse, &frame).unwrap();
        assert!(max_abs(&(oracle - h)) < 1e-9, "{}", max_abs(&(oracle - h)));
    }

    #[test]
    fn isospectral_with_shifted_rta_hamiltonian() {
        // U (H̃ − diag φ) U† = H_rot ⇒ equal spectra at every t
        let (sys, pulse, frame) = valid_setup([0.2, 0.1, 0.6, -0.3], [0.3, 0.2, 0.7, 0.4]);
        let h = rotate(&sys, &pulse, &frame).unwrap();
        let mut er: Vec<f64> = h.map(|z| z.re).symmetric_eigen().eigenvalues.iter().copied().collect();
        er.sort_by(|a, b| a.total_cmp(b));
        for &t in &[0.0, 3.3, 17.1] {
            let mut m = crate::model::hamiltonian_rta(&sys, &pulse, t);
            for k in 0..4 {
                m[(k, k)] -= C64::new(frame.phi[k], 0.0);
            }
            let mut e: Vec<f64> = nalgebra::linalg::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            e.sort_by(|a, b| a.total_cmp(b));
            for k in 0..4 {
                assert!((e[k] - er[k]).abs() < 1e-9, "t={t}");
            }
        }
    }

    #[test]
    fn general_eigenvalues_examples() {
        let e = eigensystem_general([2.0, 2.0, 2.0, 2.0]).unwrap();
        let expect = [-2.0, 2.0, 0.0, 0.0];
        for k in 0..4 {
            assert!((e[k] - expect[k]).abs() < 1e-15);
        }
        assert_eq!(eigensystem_general([0.0; 4]).unwrap().map(f64::abs), [0.0; 4]);
        let (h1, h2) = (0.7, 0.3);
        let e = eigensystem_general([h1, h2, h2, h1]).unwrap();
        let expect = [-(h1 + h2) / 2.0, (h1 + h2) / 2.0, -(h1 - h2) / 2.0, (h1 - h2) / 2.0];
        for k in 0..4 {
            assert!((e[k] - expect[k]).abs() < 1e-15);
        }
        assert!(eigensystem_general([1.0, -1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn general_formula_matches_diagonalisation() {
        let mut x = 0.5_f64;
        for _ in 0..1000 {
            let mut h = [0.0; 4];
            for v in h.iter_mut() {
                x = (x * 9301.0 + 49297.0 / 233280.0).fract();
                *v = 0.01 + 3.0 * x;
            }
            let e = eigensystem_general(h).unwrap();
            assert!(e[0] <= e[2] && e[2] <= e[3] && e[3] <= e[1]);
            let mut closed = e.to_vec();
            closed.sort_by(|a, b| a.total_cmp(b));
            let numeric = sorted_numeric(h);
            let scale = numeric.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for k in 0..4 {
                assert!((closed[k] - numeric[k]).abs() <= 1e-10 * scale, "{h:?}");
            }
        }
    }

    #[test]
    fn coefficient_matrix_is_involutory_orthogonal_symmetric() {
        let c = coefficient_matrix();
        assert_eq!(c * c, RealMat4::identity());
        assert_eq!(c, c.transpose());
        assert_eq!(c.transpose() * c, RealMat4::identity());
    }

    #[test]
    fn symmetric_eigensystem() {
        let es = eigensystem_symmetric(1.0, 0.0);
        assert_eq!(es.energies, [-0.5, 0.5, -0.5, 0.5]);
        let es = eigensystem_symmetric(3.0, 5.0);
        let h = static_rotating_matrix([3.0, 5.0, 5.0, 3.0]);
        for j in 0..4 {
            let v = es.vectors.row(j).transpose();
            let r = h * v - v * es.energies[j];
            assert!(r.amax() <= 1e-12 * 5.0, "j={j}");
        }
        assert_eq!(es.ascending_order(), [0, 3, 2, 1]);
    }
}
