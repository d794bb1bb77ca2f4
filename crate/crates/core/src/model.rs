//! Static two-spin parameters, the four-harmonic pulse, and the Hamiltonians
//! built from them.
//!
//! Conventions: ħ = 1, every frequency is an angular frequency, and the basis
//! is ordered `|00⟩, |01⟩, |10⟩, |11⟩` with the first digit belonging to spin 1
//! (`0` = spin up). Matrix indices below are 0-based, so transition `Ω₁`
//! (`|00⟩ ↔ |10⟩`) lives at `(0, 2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::linalg::{cis, Mat4, C64, ZERO};

/// Minimum ratio between the closest pair of transition frequencies and the
/// strongest resonant coupling.
pub const GUARD_BAND_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error(
        "degenerate spectrum: closest transitions are {min_separation:e} apart, \
         selective addressing needs at least {required:e}"
    )]
    DegenerateSpectrum { min_separation: f64, required: f64 },
}

/// Larmor frequencies, Ising coupling and gyromagnetic ratios of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpinSystemDoc", into = "SpinSystemDoc")]
pub struct SpinSystem {
    omega1: f64,
    omega2: f64,
    j: f64,
    gamma1: f64,
    gamma2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinSystemDoc {
    omega1: f64,
    omega2: f64,
    #[serde(rename = "J")]
    j: f64,
    gamma1: f64,
    gamma2: f64,
}

impl TryFrom<SpinSystemDoc> for SpinSystem {
    type Error = ModelError;

    fn try_from(d: SpinSystemDoc) -> Result<Self, Self::Error> {
        SpinSystem::new(d.omega1, d.omega2, d.j, d.gamma1, d.gamma2)
    }
}

impl From<SpinSystem> for SpinSystemDoc {
    fn from(s: SpinSystem) -> Self {
        SpinSystemDoc {
            omega1: s.omega1,
            omega2: s.omega2,
            j: s.j,
            gamma1: s.gamma1,
            gamma2: s.gamma2,
        }
    }
}

impl SpinSystem {
    /// Validates `ω₁ > ω₂ > 0`, `0 ≤ J < ω₂` and positive gyromagnetic ratios.
    ///
    /// `J = 0` is accepted so that degenerate systems can be diagnosed
    /// downstream; [`spectrum`] rejects them.
    pub fn new(omega1: f64, omega2: f64, j: f64, gamma1: f64, gamma2: f64) -> Result<Self, ModelError> {
        let all = [omega1, omega2, j, gamma1, gamma2];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidSystem("parameters must be finite".into()));
        }
        if !(omega2 > 0.0 && omega1 > omega2) {
            return Err(ModelError::InvalidSystem(format!(
                "need omega1 > omega2 > 0, got omega1={omega1}, omega2={omega2}"
            )));
        }
        if j < 0.0 {
            return Err(ModelError::InvalidSystem(format!("J must be non-negative, got {j}")));
        }
        if j >= omega2 {
            return Err(ModelError::InvalidSystem(format!(
                "J={j} must be below omega2={omega2} for the level ordering to hold"
            )));
        }
        if !(gamma1 > 0.0 && gamma2 > 0.0) {
            return Err(ModelError::InvalidSystem("gyromagnetic ratios must be positive".into()));
        }
        Ok(Self { omega1, omega2, j, gamma1, gamma2 })
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }
    pub fn omega2(&self) -> f64 {
        self.omega2
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// Small parameter `J/(ω₁ − ω₂)` controlling the flip-flop correction.
    pub fn eta(&self) -> f64 {
        self.j / (self.omega1 - self.omega2)
    }

    /// Copy with a different coupling constant.
    pub fn with_j(&self, j: f64) -> Result<Self, ModelError> {
        Self::new(self.omega1, self.omega2, j, self.gamma1, self.gamma2)
    }
}

/// Ising eigenenergies and the four resonant transition frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eps: [f64; 4],
    pub omega_res: [f64; 4],
}

impl Spectrum {
    /// Closed forms, no degeneracy check.
    pub fn of(sys: &SpinSystem) -> Self {
        let (w1, w2, j) = (sys.omega1, sys.omega2, sys.j);
        Spectrum {
            eps: [
                -(w1 + w2 + j) / 2.0,
                -(w1 - w2 - j) / 2.0,
                (w1 - w2 + j) / 2.0,
                (w1 + w2 - j) / 2.0,
            ],
            omega_res: [w1 + j, w2 - j, w2 + j, w1 - j],
        }
    }

    /// Smallest `|Ω_j − Ω_k|` over distinct pairs.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for a in 0..4 {
            for b in (a + 1)..4 {
                m = m.min((self.omega_res[a] - self.omega_res[b]).abs());
            }
        }
        m
    }

    /// Rejects coupling strengths that cannot address the transitions
    /// selectively: `min |Ω_j − Ω_k| ≥ 10 · max h`.
    pub fn check_guard_band(&self, max_coupling: f64) -> Result<(), ModelError> {
        let required = GUARD_BAND_FACTOR * max_coupling;
        let min_separation = self.min_separation();
        if min_separation < required || min_separation == 0.0 {
            return Err(ModelError::DegenerateSpectrum { min_separation, required });
        }
        Ok(())
    }

    /// Largest frequency present in the static spectrum.
    pub fn fastest_frequency(&self) -> f64 {
        let gap = self.eps[3] - self.eps[0];
        self.omega_res.iter().fold(gap, |m, &w| m.max(w.abs()))
    }
}

/// Spectrum of a system, rejecting coincident transition frequencies.
pub fn spectrum(sys: &SpinSystem) -> Result<Spectrum, ModelError> {
    let s = Spectrum::of(sys);
    let scale = s.omega_res.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let min_separation = s.min_separation();
    if min_separation <= 1e-12 * scale {
        return Err(ModelError::DegenerateSpectrum { min_separation, required: 1e-12 * scale });
    }
    Ok(s)
}

/// One carrier of the pulse: `h̃ · e^{i(Ω t + Φ)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub omega: f64,
    pub phi: f64,
    pub amplitude: f64,
}

/// Rectangular four-harmonic pulse on `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseDoc", into = "PulseDoc")]
pub struct PulseSpec {
    pub harmonics: [Harmonic; 4],
    pub tau: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseDoc {
    harmonics: [Harmonic; 4],
    tau: f64,
}

impl TryFrom<PulseDoc> for PulseSpec {
    type Error = ModelError;
    fn try_from(d: PulseDoc) -> Result<Self, Self::Error> {
        PulseSpec::new(d.harmonics, d.tau)
    }
}

impl From<PulseSpec> for PulseDoc {
    fn from(p: PulseSpec) -> Self {
        PulseDoc { harmonics: p.harmonics, tau: p.tau }
    }
}

impl PulseSpec {
    pub fn new(harmonics: [Harmonic; 4], tau: f64) -> Result<Self, ModelError> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(ModelError::InvalidPulse(format!("tau must be finite and >= 0, got {tau}")));
        }
        for (k, h) in harmonics.iter().enumerate() {
            if !(h.omega.is_finite() && h.phi.is_finite() && h.amplitude.is_finite()) {
                return Err(ModelError::InvalidPulse(format!("harmonic {} is not finite", k + 1)));
            }
            if h.amplitude < 0.0 {
                return Err(ModelError::InvalidPulse(format!(
                    "harmonic {} has negative amplitude {}",
                    k + 1,
                    h.amplitude
                )));
            }
        }
        Ok(Self { harmonics, tau })
    }

    /// Pulse whose carriers sit exactly on the four transitions of `spec`.
    pub fn resonant(spec: &Spectrum, phases: [f64; 4], amplitudes: [f64; 4], tau: f64) -> Result<Self, ModelError> {
        let mut hs = [Harmonic { omega: 0.0, phi: 0.0, amplitude: 0.0 }; 4];
        for k in 0..4 {
            hs[k] = Harmonic { omega: spec.omega_res[k], phi: phases[k], amplitude: amplitudes[k] };
        }
        Self::new(hs, tau)
    }

    pub fn phases(&self) -> [f64; 4] {
        self.harmonics.map(|h| h.phi)
    }

    pub fn amplitudes(&self) -> [f64; 4] {
        self.harmonics.map(|h| h.amplitude)
    }

    pub fn frequencies(&self) -> [f64; 4] {
        self.harmonics.map(|h| h.omega)
    }

    /// Whether the drive is on at `t` (closed window `[0, τ]`).
    pub fn is_on(&self, t: f64) -> bool {
        t >= 0.0 && t <= self.tau && self.tau > 0.0
    }

    /// `f_k(t) = e^{i(Ω_k t + Φ_k)}` for all four carriers.
    pub fn carriers(&self, t: f64) -> [C64; 4] {
        self.harmonics.map(|h| cis(angle::phase_product(h.omega, t) + h.phi))
    }

    /// Resonant couplings `h₁..h₄` of the RTA Hamiltonian.
    ///
    /// Each carrier is weighted by the gyromagnetic ratio of the spin its
    /// transition flips: `Ω₁, Ω₄` flip spin 1 and `Ω₂, Ω₃` flip spin 2.
    pub fn rta_couplings(&self, sys: &SpinSystem) -> [f64; 4] {
        let a = self.amplitudes();
        [sys.gamma1 * a[0], sys.gamma2 * a[1], sys.gamma2 * a[2], sys.gamma1 * a[3]]
    }
}

/// Off-diagonal slots driven by the pulse: `(row, col)` with row < col.
/// Slots 0 and 3 flip spin 1, slots 1 and 2 flip spin 2.
pub(crate) const DRIVE_SLOTS: [(usize, usize); 4] = [(0, 2), (1, 3), (0, 1), (2, 3)];

/// Per-slot, per-carrier complex weights of the drive: the matrix element in
/// slot `s` is `Σ_k weights[s][k] · f_k(t)` (lower triangle is the conjugate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveWeights(pub [[f64; 4]; 4]);

impl DriveWeights {
    /// All eight `h_{ik}` terms of the lab-frame pulse Hamiltonian.
    pub fn exact(sys: &SpinSystem, pulse: &PulseSpec) -> Self {
        let a = pulse.amplitudes();
        let s1 = a.map(|x| -0.5 * sys.gamma1 * x);
        let s2 = a.map(|x| -0.5 * sys.gamma2 * x);
        DriveWeights([s1, s1, s2, s2])
    }

    /// Only the resonant term in each slot.
    pub fn rta(sys: &SpinSystem, pulse: &PulseSpec) -> Self {
        let h = pulse.rta_couplings(sys);
        let mut w = [[0.0; 4]; 4];
        // slot (0,2) ← Ω₁, (1,3) ← Ω₄, (0,1) ← Ω₃, (2,3) ← Ω₂
        w[0][0] = -0.5 * h[0];
        w[1][3] = -0.5 * h[3];
        w[2][2] = -0.5 * h[2];
        w[3][1] = -0.5 * h[1];
        DriveWeights(w)
    }

    pub fn fill(&self, carriers: &[C64; 4], out: &mut Mat4) {
        for (s, &(r, c)) in DRIVE_SLOTS.iter().enumerate() {
            let mut v = ZERO;
            for k in 0..4 {
                let w = self.0[s][k];
                if w != 0.0 {
                    v += carriers[k] * w;
                }
            }
            out[(r, c)] += v;
            out[(c, r)] += v.conj();
        }
    }
}

/// Static Ising part, optionally with the isotropic flip-flop term.
pub fn static_hamiltonian(sys: &SpinSystem, include_xy: bool) -> Mat4 {
    let s = Spectrum::of(sys);
    let mut h = Mat4::zeros();
    for k in 0..4 {
        h[(k, k)] = C64::new(s.eps[k], 0.0);
    }
    if include_xy {
        h[(1, 2)] = C64::new(-sys.j, 0.0);
        h[(2, 1)] = C64::new(-sys.j, 0.0);
    }
    h
}

/// Lab-frame Hamiltonian with every carrier acting on both spins.
pub fn hamiltonian_exact(sys: &SpinSystem, pulse: &PulseSpec, t: f64, include_xy: bool) -> Mat4 {
    let mut h = static_hamiltonian(sys, include_xy);
    if pulse.is_on(t) {
        DriveWeights::exact(sys, pulse).fill(&pulse.carriers(t), &mut h);
    }
    h
}

/// Resonant-transition approximation: each carrier drives only its own
/// transition.
pub fn hamiltonian_rta(sys: &SpinSystem, pulse: &PulseSpec, t: f64) -> Mat4 {
    let mut h = static_hamiltonian(sys, false);
    if pulse.is_on(t) {
        DriveWeights::rta(sys, pulse).fill(&pulse.carriers(t), &mut h);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, kron2, max_abs};
    use nalgebra::Matrix2;

    fn desk() -> SpinSystem {
        SpinSystem::new(500.0, 125.0, 1.0, 1.0, 0.25).unwrap()
    }

    fn pulse_for(sys: &SpinSystem, phases: [f64; 4], amps: [f64; 4], tau: f64) -> PulseSpec {
        PulseSpec::resonant(&Spectrum::of(sys), phases, amps, tau).unwrap()
    }

    #[test]
    fn desk_spectrum_values() {
        let s = spectrum(&desk()).unwrap();
        assert_eq!(s.omega_res, [501.0, 124.0, 126.0, 499.0]);
        assert_eq!(s.eps, [-313.0, -187.0, 188.0, 312.0]);
    }

    #[test]
    fn spectrum_matches_diagonalised_ising_hamiltonian() {
        // oracle: H_z from Pauli tensors, energies read off its diagonal
        let sys = desk();
        let sz = Matrix2::new(C64::new(1.0, 0.0), ZERO, ZERO, C64::new(-1.0, 0.0));
        let id = Matrix2::identity();
        let hz = (kron2(&sz, &id) * C64::from(sys.omega1()) + kron2(&id, &sz) * C64::from(sys.omega2()) + kron2(&sz, &sz) * C64::from(sys.j()))
            * C64::new(-0.5, 0.0);
        let eig = hz.map(|z| z.re).symmetric_eigen();
        let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = Spectrum::of(&sys);
        for k in 0..4 {
            assert!((e[k] - s.eps[k]).abs() < 1e-12);
        }
        // transitions as level differences
        let d = |a: usize, b: usize| e[b] - e[a];
        let expect = [d(0, 2), d(2, 3), d(0, 1), d(1, 3)];
        for k in 0..4 {
            assert!((expect[k] - s.omega_res[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coupling_is_degenerate() {
        let sys = SpinSystem::new(500.0, 125.0, 0.0, 1.0, 0.25).unwrap();
        let s = Spectrum::of(&sys);
        assert_eq!(s.eps[1], -s.eps[2]);
        assert_eq!(s.omega_res[0], s.omega_res[3]);
        assert!(matches!(spectrum(&sys), Err(ModelError::DegenerateSpectrum { .. })));
    }

    #[test]
    fn hardware_scale_eta() {
        let sys = SpinSystem::new(5.0e8, 1.25e8, 200.0, 1.0, 0.25).unwrap();
        assert!((sys.eta() - 200.0 / 3.75e8).abs() < 1e-20);
        assert!(((sys.eta() - 0.54e-6) / 0.54e-6).abs() < 0.05);
    }

    #[test]
    fn invalid_systems() {
        assert!(SpinSystem::new(100.0, 200.0, 1.0, 1.0, 1.0).is_err());
        assert!(SpinSystem::new(200.0, 100.0, -1.0, 1.0, 1.0).is_err());
        assert!(SpinSystem::new(200.0, 100.0, 100.0, 1.0, 1.0).is_err());
        assert!(SpinSystem::new(200.0, 100.0, 1.0, 0.0, 1.0).is_err());
        assert!(SpinSystem::new(f64::NAN, 100.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn guard_band() {
        let s = Spectrum::of(&desk());
        assert!(s.check_guard_band(0.2).is_ok());
        assert!(s.check_guard_band(0.21).is_err());
    }

    #[test]
    fn exact_is_ising_outside_window() {
        let sys = desk();
        let p = pulse_for(&sys, [0.3; 4], [1.0, 2.0, 3.0, 4.0], 2.0);
        let h = hamiltonian_exact(&sys, &p, 2.5, false);
        let s = Spectrum::of(&sys);
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r == c { s.eps[r] } else { 0.0 };
                assert_eq!(h[(r, c)], C64::new(expect, 0.0));
            }
        }
        assert_eq!(hamiltonian_exact(&sys, &p, -0.1, false), h);
    }

    #[test]
    fn xy_term_couples_only_01_10() {
        let sys = desk();
        let p = pulse_for(&sys, [0.0; 4], [0.0; 4], 1.0);
        let h = hamiltonian_exact(&sys, &p, 0.4, true);
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    let expect = if (r, c) == (1, 2) || (r, c) == (2, 1) { -sys.j() } else { 0.0 };
                    assert_eq!(h[(r, c)], C64::new(expect, 0.0), "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn exact_matches_pauli_tensor_construction() {
        // oracle: −½(ω₁σ₁ᶻ + ω₂σ₂ᶻ + Jσ₁ᶻσ₂ᶻ) − ¼ Σ_{ik} h_ik (f_k σ_i⁺ + f_k* σ_i⁻)
        let sys = SpinSystem::new(500.0, 125.0, 1.0, 1.3, 0.4).unwrap();
        let p = pulse_for(&sys, [0.1, -0.7, 1.9, 2.5], [0.5, 0.9, 1.7, 0.2], 3.0);
        let one = C64::new(1.0, 0.0);
        let sz = Matrix2::new(one, ZERO, ZERO, -one);
        let sx = Matrix2::new(ZERO, one, one, ZERO);
        let sy = Matrix2::new(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO);
        let id = Matrix2::identity();
        let splus = sx + sy * C64::new(0.0, 1.0);
        let sminus = sx - sy * C64::new(0.0, 1.0);
        for &t in &[0.0, 0.77, 2.9] {
            let mut h = (kron2(&sz, &id) * C64::from(sys.omega1())
                + kron2(&id, &sz) * C64::from(sys.omega2())
                + kron2(&sz, &sz) * C64::from(sys.j())
                + (kron2(&sx, &sx) + kron2(&sy, &sy)) * C64::from(sys.j()))
                * C64::new(-0.5, 0.0);
            for k in 0..4 {
                let hk = p.harmonics[k];
                let f = cis(hk.omega * t + hk.phi);
                for (gamma, op_p, op_m) in [
                    (sys.gamma1(), kron2(&splus, &id), kron2(&sminus, &id)),
                    (sys.gamma2(), kron2(&id, &splus), kron2(&id, &sminus)),
                ] {
                    h -= (op_p * f + op_m * f.conj()) * C64::new(0.25 * gamma * hk.amplitude, 0.0);
                }
            }
            let got = hamiltonian_exact(&sys, &p, t, true);
            assert!(max_abs(&(got - h)) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn rta_structure() {
        let sys = desk();
        let p = pulse_for(&sys, [0.0; 4], [0.1, 0.4, 0.4, 0.1], 10.0);
        let h = hamiltonian_rta(&sys, &p, 0.0);
        let hc = p.rta_couplings(&sys);
        assert_eq!(h[(0, 3)], ZERO);
        assert_eq!(h[(1, 2)], ZERO);
        assert_eq!(h[(0, 1)], C64::new(-hc[2] / 2.0, 0.0));
        assert_eq!(h[(0, 2)], C64::new(-hc[0] / 2.0, 0.0));
        assert_eq!(h[(1, 3)], C64::new(-hc[3] / 2.0, 0.0));
        assert_eq!(h[(2, 3)], C64::new(-hc[1] / 2.0, 0.0));
        assert!(max_abs(&(h - h.transpose())) == 0.0);
    }

    #[test]
    fn rta_is_exact_minus_off_resonant_terms() {
        // the discarded terms: in each slot every carrier except the resonant one
        let sys = SpinSystem::new(500.0, 125.0, 1.0, 1.1, 0.3).unwrap();
        let p = pulse_for(&sys, [0.4, 1.1, -2.0, 0.9], [0.3, 0.6, 0.8, 0.5], 50.0);
        let resonant = [0usize, 3, 2, 1]; // carrier resonant in each slot
        let gamma = [sys.gamma1(), sys.gamma1(), sys.gamma2(), sys.gamma2()];
        let mut seed = 12345u64;
        for _ in 0..10 {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t = (seed >> 11) as f64 / (1u64 << 53) as f64 * p.tau;
            let f = p.carriers(t);
            let mut residual = Mat4::zeros();
            for (s, &(r, c)) in DRIVE_SLOTS.iter().enumerate() {
                for k in 0..4 {
                    if k != resonant[s] {
                        let v = f[k] * (-0.5 * gamma[s] * p.harmonics[k].amplitude);
                        residual[(r, c)] += v;
                        residual[(c, r)] += v.conj();
                    }
                }
            }
            let diff = hamiltonian_exact(&sys, &p, t, false) - hamiltonian_rta(&sys, &p, t) - residual;
            assert!(max_abs(&diff) < 1e-13);
            // every discarded term oscillates at least 2J away from its slot's transition
            let s = Spectrum::of(&sys);
            let slot_freq = [s.omega_res[0], s.omega_res[3], s.omega_res[2], s.omega_res[1]];
            for sl in 0..4 {
                for k in 0..4 {
                    if k != resonant[sl] {
                        assert!((p.harmonics[k].omega - slot_freq[sl]).abs() >= 2.0 * sys.j() - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn hermitian_and_traceless() {
        let sys = desk();
        let p = pulse_for(&sys, [0.2, 0.3, 0.4, 0.1], [0.1, 0.2, 0.3, 0.4], 5.0);
        for i in 0..50 {
            let t = i as f64 * 0.1;
            for h in [hamiltonian_exact(&sys, &p, t, true), hamiltonian_rta(&sys, &p, t)] {
                assert!(hermiticity_defect(&h) <= 1e-14 * max_abs(&h));
                assert!(h.trace().norm() < 1e-12);
            }
        }
        assert_eq!(static_hamiltonian(&sys, false).trace(), ZERO);
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let sys = desk();
        let js = serde_json::to_string(&sys).unwrap();
        assert!(js.contains("\"J\":1.0"));
        let back: SpinSystem = serde_json::from_str(&js).unwrap();
        assert_eq!(back, sys);
        let bad = r#"{"omega1":500,"omega2":125,"J":1,"gamma1":1,"gamma2":0.25,"extra":1}"#;
        assert!(serde_json::from_str::<SpinSystem>(bad).is_err());
        let invalid = r#"{"omega1":100,"omega2":125,"J":1,"gamma1":1,"gamma2":0.25}"#;
        assert!(serde_json::from_str::<SpinSystem>(invalid).is_err());

        let p = pulse_for(&sys, [0.1, 0.2, 0.3, 0.0], [1.0, 2.0, 3.0, 4.0], 6.0);
        let back: PulseSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let three = r#"{"harmonics":[{"omega":1,"phi":0,"amplitude":1},{"omega":1,"phi":0,"amplitude":1},{"omega":1,"phi":0,"amplitude":1}],"tau":1}"#;
        assert!(serde_json::from_str::<PulseSpec>(three).is_err());
    }
}
