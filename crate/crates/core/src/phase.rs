//! Total, dynamical and geometric phases of cyclic evolutions.
//!
//! Inputs are logical states (see [`crate::evolve::gate_tomography`]); the
//! total phase of basis state `i` is `arg ⟨m_i|G|m_i⟩`. The dynamical phase
//! is `−∫⟨Ψ|H|Ψ⟩dt` along the lab trajectory with `H` the RTA Hamiltonian
//! unless a diagnostic integrand is requested.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{self, wrap};
use crate::evolve::{EvolveError, FrameTag, Propagator, StateVector, Trajectory};
use crate::frame::FrameParams;
use crate::linalg::{Mat4, C64};
use crate::model::{static_hamiltonian, DriveWeights, PulseSpec, Spectrum, SpinSystem};

pub const CYCLIC_THRESHOLD: f64 = 1.0 - 1e-6;
/// Relative tolerance on `h₁τ = 2mπ`, `h₂τ = 2nπ`.
pub const CONDITION_TOL: f64 = 1e-9;
/// Quadrature tolerance relative to `max|ε_k|·T`.
pub const QUADRATURE_TOL: f64 = 1e-9;
/// Gate phases closer than this (rad) count as equal.
pub const AA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("evolution is not cyclic: |<psi0|psi_tau>| = {overlap}")]
    NotCyclic { overlap: f64 },
    #[error("cyclicity condition unmet: h1*tau/2pi = {m_ratio}, h2*tau/2pi = {n_ratio}")]
    ConditionUnmet { m_ratio: f64, n_ratio: f64 },
    #[error("quadrature error estimate {estimate:e} exceeds {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },
    #[error("trajectory grid unusable: {0}")]
    IrregularGrid(String),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// `arg⟨ψ₀|ψτ⟩`, provided the overlap magnitude reaches `threshold`.
pub fn total_phase_with(psi0: &StateVector, psi_tau: &StateVector, threshold: f64) -> Result<f64, PhaseError> {
    let z = psi0.inner(psi_tau);
    let overlap = z.norm();
    if !(overlap >= threshold) {
        return Err(PhaseError::NotCyclic { overlap });
    }
    Ok(wrap(z.arg()))
}

pub fn total_phase(psi0: &StateVector, psi_tau: &StateVector) -> Result<f64, PhaseError> {
    total_phase_with(psi0, psi_tau, CYCLIC_THRESHOLD)
}

/// Hamiltonian used inside the dynamical-phase integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    #[default]
    Rta,
    Exact {
        include_xy: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicalPhase {
    pub value: f64,
    /// Richardson estimate `|S_h − S_2h| / 15`.
    pub error_estimate: f64,
    pub tolerance: f64,
    /// `|∫ Im⟨Ψ|H|Ψ⟩ dt|`.
    pub imaginary_residue: f64,
}

struct Expectation {
    static_h: Mat4,
    weights: DriveWeights,
    pulse: PulseSpec,
}

impl Expectation {
    fn new(sys: &SpinSystem, pulse: &PulseSpec, integrand: Integrand) -> Self {
        let (weights, xy) = match integrand {
            Integrand::Rta => (DriveWeights::rta(sys, pulse), false),
            Integrand::Exact { include_xy } => (DriveWeights::exact(sys, pulse), include_xy),
        };
        Self { static_h: static_hamiltonian(sys, xy), weights, pulse: *pulse }
    }

    fn at(&self, t: f64, on: bool, psi: &crate::linalg::Vec4) -> C64 {
        let mut h = self.static_h;
        if on {
            self.weights.fill(&self.pulse.carriers(t), &mut h);
        }
        psi.dotc(&(h * psi))
    }
}

/// Composite Simpson on a possibly non-uniform grid with an even number of
/// intervals.
fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in (0..t.len() - 1).step_by(2) {
        let (h0, h1) = (t[k + 1] - t[k], t[k + 2] - t[k + 1]);
        let hs = h0 + h1;
        s += hs / 6.0
            * (f[k] * (2.0 - h1 / h0) + f[k + 1] * hs * hs / (h0 * h1) + f[k + 2] * (2.0 - h0 / h1));
    }
    s
}

/// Index ranges of the trajectory between pulse edges.
fn segments(times: &[f64], tau: f64) -> Result<Vec<(usize, usize)>, PhaseError> {
    if times.len() < 2 {
        return Err(PhaseError::IrregularGrid("fewer than two samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PhaseError::IrregularGrid("times are not strictly increasing".into()));
    }
    let mut cuts = vec![0];
    for edge in [0.0, tau] {
        if edge > times[0] && edge < times[times.len() - 1] {
            match times.iter().position(|&t| t == edge) {
                Some(i) => cuts.push(i),
                None => return Err(PhaseError::IrregularGrid(format!("no sample at pulse edge t = {edge}"))),
            }
        }
    }
    cuts.push(times.len() - 1);
    cuts.dedup();
    Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
}

/// `−∫⟨Ψ|H|Ψ⟩dt` over the whole trajectory by composite Simpson, certified
/// against the same rule on every other sample. Each segment between pulse
/// edges needs a multiple of four intervals.
pub fn dynamical_phase(
    traj: &Trajectory,
    sys: &SpinSystem,
    pulse: &PulseSpec,
    integrand: Integrand,
) -> Result<DynamicalPhase, PhaseError> {
    if traj.frame != FrameTag::Lab {
        return Err(PhaseError::Evolve(EvolveError::FrameTagMismatch { left: traj.frame, right: FrameTag::Lab }));
    }
    let ex = Expectation::new(sys, pulse, integrand);
    quadrature(&traj.times, sys, pulse, |i, on| ex.at(traj.times[i], on, &traj.states[i]))
}

/// Simpson with Richardson certificate on samples `value(i, drive_on)`.
fn quadrature(
    times: &[f64],
    sys: &SpinSystem,
    pulse: &PulseSpec,
    mut value: impl FnMut(usize, bool) -> C64,
) -> Result<DynamicalPhase, PhaseError> {
    let (mut fine, mut coarse, mut imag) = (0.0, 0.0, 0.0);
    for (a, b) in segments(times, pulse.tau)? {
        if (b - a) % 4 != 0 {
            return Err(PhaseError::IrregularGrid(format!(
                "segment [{}, {}] has {} intervals, need a multiple of 4",
                times[a],
                times[b],
                b - a
            )));
        }
        let on = pulse.is_on(0.5 * (times[a] + times[b]));
        let vals: Vec<C64> = (a..=b).map(|i| value(i, on)).collect();
        let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
        let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
        let ts = &times[a..=b];
        fine += simpson(ts, &re);
        imag += simpson(ts, &im);
        let ts2: Vec<f64> = ts.iter().step_by(2).copied().collect();
        let re2: Vec<f64> = re.iter().step_by(2).copied().collect();
        coarse += simpson(&ts2, &re2);
    }
    let span = times[times.len() - 1] - times[0];
    let eps_max = Spectrum::of(sys).eps.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let tolerance = QUADRATURE_TOL * (eps_max * span).max(1.0);
    let error_estimate = (fine - coarse).abs() / 15.0;
    if !(error_estimate <= tolerance) {
        return Err(PhaseError::GridTooCoarse { estimate: error_estimate, tolerance });
    }
    Ok(DynamicalPhase { value: -fine, error_estimate, tolerance, imaginary_residue: imag.abs() })
}

/// Per-level integrals `∫₀^τ |c̃_k^{(i)}|² ε_k dt` along the closed-form
/// rotating-frame solution, and the two drive cross terms
/// `∫⟨ψ|−(h₁/2)σˣ⊗1|ψ⟩dt`, `∫⟨ψ|−(h₂/2)1⊗σˣ|ψ⟩dt`. Composite Simpson on
/// `intervals` (even) uniform steps.
pub fn term_integrals(sys: &SpinSystem, h1: f64, h2: f64, tau: f64, i: usize, intervals: usize) -> ([f64; 4], [C64; 2]) {
    let eps = Spectrum::of(sys).eps;
    let n = intervals.max(2).next_multiple_of(2);
    let ts: Vec<f64> = (0..=n).map(|k| tau * k as f64 / n as f64).collect();
    let mut diag = [0.0; 4];
    let mut cross = [C64::new(0.0, 0.0); 2];
    let cs: Vec<[C64; 4]> = ts.iter().map(|&t| crate::evolve::coeffs_analytic(h1, h2, t, i)).collect();
    for k in 0..4 {
        let f: Vec<f64> = cs.iter().map(|c| c[k].norm_sqr() * eps[k]).collect();
        diag[k] = simpson(&ts, &f);
    }
    // σˣ on spin 1 pairs (0,2),(1,3); on spin 2 pairs (0,1),(2,3)
    for (slot, (pairs, h)) in [([(0, 2), (1, 3)], h1), ([(0, 1), (2, 3)], h2)].into_iter().enumerate() {
        let vals: Vec<C64> = cs
            .iter()
            .map(|c| pairs.iter().fold(C64::new(0.0, 0.0), |s, &(a, b)| s + (c[a].conj() * c[b] + c[b].conj() * c[a]) * (-0.5 * h)))
            .collect();
        let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
        let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
        cross[slot] = C64::new(simpson(&ts, &re), simpson(&ts, &im));
    }
    (diag, cross)
}

/// Integers `(m, n)` with `h₁τ = 2mπ`, `h₂τ = 2nπ`, if both hold.
pub fn cyclic_orders(sys: &SpinSystem, pulse: &PulseSpec) -> Result<(u32, u32), PhaseError> {
    let h = pulse.rta_couplings(sys);
    let two_pi = 2.0 * std::f64::consts::PI;
    let m_ratio = h[0] * pulse.tau / two_pi;
    let n_ratio = h[1] * pulse.tau / two_pi;
    let near = |x: f64| x.round() >= 1.0 && (x - x.round()).abs() <= CONDITION_TOL * x.abs();
    if !(near(m_ratio) && near(n_ratio)) {
        return Err(PhaseError::ConditionUnmet { m_ratio, n_ratio });
    }
    Ok((m_ratio.round() as u32, n_ratio.round() as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub beta: [f64; 4],
    #[serde(rename = "delta_D")]
    pub delta_d: [f64; 4],
    #[serde(rename = "delta_G")]
    pub delta_g: [f64; 4],
    pub global_sign: f64,
    pub condition_met: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aa_phase: Option<f64>,
    /// Accumulated frame phase `−(φ_iτ + θ_i)` plus the wrapped rotating-frame
    /// overlap, without reduction.
    pub beta_unwrapped: [f64; 4],
    pub m: u32,
    pub n: u32,
    pub propagator: String,
    pub quadrature_error: [f64; 4],
    pub imaginary_residue: [f64; 4],
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PhaseReport {
    /// `Θ_i = arg A − β_i`, the diagonal phases in `A·diag(e^{−iΘ})`.
    pub fn gate_phases(&self) -> [f64; 4] {
        let arg_a = if self.global_sign < 0.0 { std::f64::consts::PI } else { 0.0 };
        self.beta.map(|b| wrap(arg_a - b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseOptions {
    pub integrand: Integrand,
    pub cyclic_threshold: f64,
    /// Uniform intervals for closed-form trajectories (multiple of 4).
    pub analytic_intervals: usize,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { integrand: Integrand::Rta, cyclic_threshold: CYCLIC_THRESHOLD, analytic_intervals: 4096 }
    }
}

pub fn decompose(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    propagator: &Propagator,
) -> Result<PhaseReport, PhaseError> {
    decompose_with(sys, pulse, frame, propagator, &PhaseOptions::default())
}

struct BasisResult {
    beta: f64,
    beta_unwrapped: f64,
    dynamical: DynamicalPhase,
}

fn basis_run(
    i: usize,
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    propagator: &Propagator,
    opts: &PhaseOptions,
) -> Result<BasisResult, PhaseError> {
    let psi0 = StateVector::basis(i);
    let traj = propagator.trajectory(sys, pulse, frame, &psi0, pulse.tau, opts.analytic_intervals)?;
    let out = traj.last().ok_or_else(|| PhaseError::IrregularGrid("empty trajectory".into()))?;
    let beta = total_phase_with(&psi0, &out, opts.cyclic_threshold)?;
    let dynamical = dynamical_phase(&traj, sys, pulse, opts.integrand)?;
    // rotating-frame amplitude: ψ_i = e^{i(φ_iτ+θ_i)} Ψ_i
    let rot = crate::linalg::cis(frame.phase_at(i, pulse.tau)) * out.amplitudes()[i];
    let beta_unwrapped = -(frame.phi[i] * pulse.tau + frame.theta[i]) + rot.arg();
    Ok(BasisResult { beta, beta_unwrapped, dynamical })
}

/// All four basis states from one propagator run: `β` from the gate
/// diagonal, `δ_D` from expectations sampled along the columns.
fn numeric_runs(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    h: &crate::evolve::DrivenHamiltonian,
    control: &crate::evolve::StepControl,
    opts: &PhaseOptions,
) -> Result<Vec<BasisResult>, PhaseError> {
    let ex = Expectation::new(sys, pulse, opts.integrand);
    let (u, times, samples, _) = crate::evolve::propagate_unitary_sampled(h, (0.0, pulse.tau), control, |t, m| {
        let on = pulse.is_on(t);
        let e: [C64; 4] = std::array::from_fn(|i| ex.at(t, on, &m.column(i).into_owned()));
        e
    })?;
    let u0 = frame.diagonal(0.0);
    let mut out = Vec::with_capacity(4);
    for i in 0..4 {
        let psi0 = StateVector::basis(i);
        let col = u.column(i).into_owned() * u0[i].conj();
        let psi_tau = StateVector::from_unnormalized(col)?;
        let beta = total_phase_with(&psi0, &psi_tau, opts.cyclic_threshold)?;
        let dynamical = quadrature(&times, sys, pulse, |k, _| samples[k][i])?;
        let rot = crate::linalg::cis(frame.phase_at(i, pulse.tau)) * psi_tau.amplitudes()[i];
        let beta_unwrapped = -(frame.phi[i] * pulse.tau + frame.theta[i]) + rot.arg();
        out.push(BasisResult { beta, beta_unwrapped, dynamical });
    }
    Ok(out)
}

pub fn decompose_with(
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
    propagator: &Propagator,
    opts: &PhaseOptions,
) -> Result<PhaseReport, PhaseError> {
    let (m, n) = cyclic_orders(sys, pulse)?;
    let results = match propagator.driven(sys, pulse) {
        Some((h, control)) => numeric_runs(sys, pulse, frame, &h, &control, opts)?,
        None => {
            let runs: Vec<Result<BasisResult, PhaseError>> =
                (0..4).into_par_iter().map(|i| basis_run(i, sys, pulse, frame, propagator, opts)).collect();
            runs.into_iter().collect::<Result<Vec<_>, _>>()?
        }
    };
    let beta: [f64; 4] = std::array::from_fn(|i| results[i].beta);
    let delta_d: [f64; 4] = std::array::from_fn(|i| results[i].dynamical.value);
    let delta_g = std::array::from_fn(|i| wrap(beta[i] - delta_d[i]));
    let theta = frame.gate_phases(pulse.tau);
    let aa_phase = theta[1..].iter().all(|&t| angle::distance(t, theta[0]).abs() <= AA_TOL).then_some(theta[0]);
    let mut warnings = Vec::new();
    if m == n {
        warnings.push(format!(
            "h1 = h2 (m = n = {m}): the dynamical phase does not cancel; |00> keeps about J*tau/4 = {:.6e} rad",
            sys.j() * pulse.tau / 4.0
        ));
    }
    Ok(PhaseReport {
        beta,
        delta_d,
        delta_g,
        global_sign: if (m + n) % 2 == 0 { 1.0 } else { -1.0 },
        condition_met: true,
        aa_phase,
        beta_unwrapped: std::array::from_fn(|i| results[i].beta_unwrapped),
        m,
        n,
        propagator: propagator.label().to_string(),
        quadrature_error: std::array::from_fn(|i| results[i].dynamical.error_estimate),
        imaginary_residue: std::array::from_fn(|i| results[i].dynamical.imaginary_residue),
        warnings,
    })
}
