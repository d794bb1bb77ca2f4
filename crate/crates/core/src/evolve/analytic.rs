//! Closed-form evolution under the RTA Hamiltonian with symmetric couplings
//! `h₁ = h₄`, `h₂ = h₃`.
//!
//! In the rotating frame the static Hamiltonian splits as
//! `−(h₁/2) σˣ⊗1 − (h₂/2) 1⊗σˣ`, so its propagator is a tensor product of two
//! single-spin rotations and every amplitude is a product of one cosine or
//! `i·sine` per spin.

use crate::frame::FrameParams;
use crate::linalg::{Mat4, Vec4, C64};
use crate::model::{PulseSpec, Spectrum, SpinSystem};

use super::{EvolveError, FrameTag, StateVector, Trajectory};

/// Amplitudes `c̃_k^{(i)}(t)`, k = 0..4, for the rotating-frame evolution of
/// basis state `i` (0-based).
pub fn coeffs_analytic(h1: f64, h2: f64, t: f64, i: usize) -> [C64; 4] {
    let w = rotating_propagator(h1, h2, t);
    std::array::from_fn(|k| w[(k, i)])
}

/// `exp(−i H_rot t)`; entry `(k, i)` is `c̃_k^{(i)}(t)`.
pub fn rotating_propagator(h1: f64, h2: f64, t: f64) -> Mat4 {
    let (s1, c1) = (0.5 * h1 * t).sin_cos();
    let (s2, c2) = (0.5 * h2 * t).sin_cos();
    // single-spin factor exp(i x σˣ) = [[cos x, i sin x], [i sin x, cos x]]
    let r1 = [[C64::new(c1, 0.0), C64::new(0.0, s1)], [C64::new(0.0, s1), C64::new(c1, 0.0)]];
    let r2 = [[C64::new(c2, 0.0), C64::new(0.0, s2)], [C64::new(0.0, s2), C64::new(c2, 0.0)]];
    let mut w = Mat4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    w[(2 * a + c, 2 * b + d)] = r1[a][b] * r2[c][d];
                }
            }
        }
    }
    w
}

/// `cos(h₁τ/2)·cos(h₂τ/2)` rounded to its sign; equals `(−1)^{m+n}` at the
/// cyclic point `h₁τ = 2mπ`, `h₂τ = 2nπ`.
pub fn global_sign(h1: f64, h2: f64, tau: f64) -> f64 {
    let a = (0.5 * h1 * tau).cos() * (0.5 * h2 * tau).cos();
    if a < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Symmetric couplings `(h₁, h₂)` of a pulse, or an error if `h₁ ≠ h₄` or
/// `h₂ ≠ h₃`.
pub fn symmetric_couplings(sys: &SpinSystem, pulse: &PulseSpec) -> Result<(f64, f64), EvolveError> {
    let h = pulse.rta_couplings(sys);
    let scale = h.iter().fold(f64::MIN_POSITIVE, |m, x| m.max(x.abs()));
    if (h[0] - h[3]).abs() > 1e-12 * scale || (h[1] - h[2]).abs() > 1e-12 * scale {
        return Err(EvolveError::AsymmetricCouplings { couplings: h });
    }
    Ok((h[0], h[1]))
}

/// Checks that the carriers sit on the transitions and that `frame` satisfies
/// the phase-matching relations for this pulse.
pub fn validate_frame(sys: &SpinSystem, pulse: &PulseSpec, frame: &FrameParams) -> Result<(), EvolveError> {
    let spec = Spectrum::of(sys);
    let scale = spec.omega_res.iter().fold(1.0_f64, |m, w| m.max(w.abs()));
    let detuning = (0..4).fold(0.0_f64, |m, k| m.max((pulse.harmonics[k].omega - spec.omega_res[k]).abs()));
    let gauge = (frame.phi[0] - spec.eps[0]).abs();
    let residual = frame.max_residual(&spec, &pulse.phases()).max(detuning / scale).max(gauge / scale);
    if !(residual <= 1e-9) {
        return Err(EvolveError::FrameMismatch { residual });
    }
    Ok(())
}

/// Lab-frame initial state for a logical input: `U†(0) ψ₀`.
pub fn lab_initial(frame: &FrameParams, psi0: &Vec4) -> Vec4 {
    let u0 = frame.diagonal(0.0);
    Vec4::from_fn(|k, _| u0[k].conj() * psi0[k])
}

/// `U†(t)` applied to a rotating-frame vector.
fn to_lab(frame: &FrameParams, t: f64, psi: &Vec4) -> Vec4 {
    let u = frame.diagonal(t);
    Vec4::from_fn(|k, _| u[k].conj() * psi[k])
}

/// Free precession under the Ising Hamiltonian for `dt`.
fn free_evolution(spec: &Spectrum, dt: f64, psi: &Vec4) -> Vec4 {
    Vec4::from_fn(|k, _| crate::linalg::cis(-crate::angle::phase_product(spec.eps[k], dt)) * psi[k])
}

/// Lab-frame state at `t` for logical input `ψ₀`: `U†(t) exp(−iH_rot t) ψ₀`
/// inside the pulse, free Ising precession after it.
pub fn propagate_rta_analytic(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    t: f64,
    psi0: &StateVector,
) -> Result<StateVector, EvolveError> {
    if !(t >= 0.0) {
        return Err(EvolveError::InvalidSpan { start: 0.0, end: t });
    }
    let (h1, h2) = symmetric_couplings(sys, pulse)?;
    validate_frame(sys, pulse, frame)?;
    let psi = evolve_unchecked(sys, pulse, frame, h1, h2, t, psi0.amplitudes());
    Ok(StateVector::from_raw(psi))
}

pub(crate) fn evolve_unchecked(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    h1: f64,
    h2: f64,
    t: f64,
    psi0: &Vec4,
) -> Vec4 {
    let t_in = t.min(pulse.tau);
    let rotated = rotating_propagator(h1, h2, t_in) * psi0;
    let lab = to_lab(frame, t_in, &rotated);
    if t > pulse.tau {
        free_evolution(&Spectrum::of(sys), t - pulse.tau, &lab)
    } else {
        lab
    }
}

/// Lab-frame gate `U†(τ) exp(−iH_rot τ)` at the end of the pulse.
pub fn analytic_gate(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
) -> Result<Mat4, EvolveError> {
    let (h1, h2) = symmetric_couplings(sys, pulse)?;
    validate_frame(sys, pulse, frame)?;
    let w = rotating_propagator(h1, h2, pulse.tau);
    let u = frame.diagonal(pulse.tau);
    Ok(Mat4::from_fn(|r, c| u[r].conj() * w[(r, c)]))
}

/// Lab-frame trajectory on a uniform grid of `intervals` steps over `[0, t_end]`.
pub fn analytic_trajectory(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    psi0: &StateVector,
    t_end: f64,
    intervals: usize,
) -> Result<Trajectory, EvolveError> {
    if !(t_end >= 0.0 && t_end.is_finite()) || intervals == 0 {
        return Err(EvolveError::InvalidSpan { start: 0.0, end: t_end });
    }
    let (h1, h2) = symmetric_couplings(sys, pulse)?;
    validate_frame(sys, pulse, frame)?;
    let intervals = if t_end == 0.0 { 0 } else { intervals };
    let dt = t_end / intervals as f64;
    let times: Vec<f64> = (0..=intervals).map(|k| if k == intervals { t_end } else { k as f64 * dt }).collect();
    let states = times
        .iter()
        .map(|&t| evolve_unchecked(sys, pulse, frame, h1, h2, t, psi0.amplitudes()))
        .collect();
    Ok(Trajectory { times, states, frame: FrameTag::Lab, certificate: None })
}
