//! Pulse synthesis for target diagonal gates.
//!
//! For a target `diag(e^{−iΘ₁}, …, e^{−iΘ₄})` (up to the global sign `A`) the
//! designer fixes `τ = 2mπ/h₁`, `h₂ = (n/m)h₁`, and solves the frame relations
//! for `θ₁` and the carrier phases `Φ₁..Φ₄`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{self, phase_product, wrap, wrapped_sum};
use crate::evolve::GateMatrix;
use crate::frame::{solve_frame, FrameError, FrameParams};
use crate::linalg::{self, C64};
use crate::model::{ModelError, PulseSpec, Spectrum, SpinSystem, GUARD_BAND_FACTOR};

/// Lower bound on `min_k Ω_k τ` for the rotating-wave picture to be trusted.
pub const MIN_OMEGA_TAU: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("design is not physically feasible: {}", reasons.join("; "))]
    Infeasible { result: Box<DesignResult>, reasons: Vec<String> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Drive strength, given either as the spin-1 coupling or as the duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    H1(f64),
    Tau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateTargetDoc", into = "GateTargetDoc")]
pub struct GateTarget {
    pub theta_targets: [f64; 4],
    pub m: u32,
    pub n: u32,
    pub drive: Drive,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateTargetDoc {
    theta_targets: [f64; 4],
    m: u32,
    n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

impl TryFrom<GateTargetDoc> for GateTarget {
    type Error = DesignError;
    fn try_from(d: GateTargetDoc) -> Result<Self, Self::Error> {
        let drive = match (d.h1, d.tau) {
            (Some(h1), None) => Drive::H1(h1),
            (None, Some(tau)) => Drive::Tau(tau),
            _ => return Err(DesignError::InvalidTarget("exactly one of h1, tau must be given".into())),
        };
        GateTarget::new(d.theta_targets, d.m, d.n, drive)
    }
}

impl From<GateTarget> for GateTargetDoc {
    fn from(t: GateTarget) -> Self {
        let (h1, tau) = match t.drive {
            Drive::H1(h) => (Some(h), None),
            Drive::Tau(tau) => (None, Some(tau)),
        };
        GateTargetDoc { theta_targets: t.theta_targets, m: t.m, n: t.n, h1, tau }
    }
}

impl GateTarget {
    pub fn new(theta_targets: [f64; 4], m: u32, n: u32, drive: Drive) -> Result<Self, DesignError> {
        if m == 0 || n == 0 {
            return Err(DesignError::InvalidTarget(format!("m and n must be >= 1, got ({m}, {n})")));
        }
        if theta_targets.iter().any(|t| !t.is_finite()) {
            return Err(DesignError::InvalidTarget("target phases must be finite".into()));
        }
        let x = match drive {
            Drive::H1(x) | Drive::Tau(x) => x,
        };
        if !(x.is_finite() && x > 0.0) {
            return Err(DesignError::InvalidTarget(format!("h1 / tau must be positive, got {x}")));
        }
        Ok(Self { theta_targets, m, n, drive })
    }

    pub fn with_h1(theta_targets: [f64; 4], m: u32, n: u32, h1: f64) -> Result<Self, DesignError> {
        Self::new(theta_targets, m, n, Drive::H1(h1))
    }

    pub fn with_tau(theta_targets: [f64; 4], m: u32, n: u32, tau: f64) -> Result<Self, DesignError> {
        Self::new(theta_targets, m, n, Drive::Tau(tau))
    }

    fn two_pi_m(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.m as f64
    }

    pub fn h1(&self) -> f64 {
        match self.drive {
            Drive::H1(h) => h,
            Drive::Tau(tau) => self.two_pi_m() / tau,
        }
    }

    pub fn tau(&self) -> f64 {
        match self.drive {
            Drive::H1(h) => self.two_pi_m() / h,
            Drive::Tau(tau) => tau,
        }
    }

    pub fn h2(&self) -> f64 {
        self.h1() * self.n as f64 / self.m as f64
    }

    pub fn global_sign(&self) -> f64 {
        if (self.m + self.n) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `Ω_k τ`.
    pub omega_tau: [f64; 4],
    pub omega_tau_min: f64,
    pub min_separation: f64,
    pub max_coupling: f64,
    /// `min|Ω_j − Ω_k| / max h_k`.
    pub selectivity_ratio: f64,
    /// `min|Ω_j − Ω_k| / (10·max h_k)`; at least 1 passes the guard band.
    pub separation_margin: f64,
    /// Field amplitudes `h̃_k`.
    pub amplitudes: [f64; 4],
    /// `h̃_k / h̃₁`.
    pub amplitude_ratios: [f64; 4],
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_ratio: Option<f64>,
    pub feasible: bool,
    #[serde(default)]
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub target: GateTarget,
    pub pulse: PulseSpec,
    pub frame: FrameParams,
    pub predicted_gate: GateMatrix,
    pub global_sign: f64,
    pub feasibility: FeasibilityReport,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Coherence-free feasibility figures for a design; `tau_phi` adds the
/// coherence-time ratio.
pub fn feasibility_report(sys: &SpinSystem, result: &DesignResult, tau_phi: Option<f64>) -> FeasibilityReport {
    let spec = Spectrum::of(sys);
    let pulse = &result.pulse;
    let tau = pulse.tau;
    let omega_tau = pulse.frequencies().map(|w| w * tau);
    let omega_tau_min = omega_tau.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let h = pulse.rta_couplings(sys);
    let max_coupling = h.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let min_separation = spec.min_separation();
    let selectivity_ratio = min_separation / max_coupling;
    let separation_margin = min_separation / (GUARD_BAND_FACTOR * max_coupling);
    let amplitudes = pulse.amplitudes();
    let amplitude_ratios = amplitudes.map(|a| a / amplitudes[0]);
    let mut reasons = Vec::new();
    let scale = spec.omega_res.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    if min_separation <= 1e-12 * scale {
        reasons.push(format!(
            "degenerate spectrum: two transition frequencies coincide (J = {}), so they cannot be addressed separately",
            sys.j()
        ));
    }
    if !(separation_margin >= 1.0) {
        reasons.push(format!(
            "transition separation {min_separation:e} is below {GUARD_BAND_FACTOR} x max coupling {max_coupling:e}"
        ));
    }
    if !(omega_tau_min >= MIN_OMEGA_TAU) {
        reasons.push(format!("min Omega*tau = {omega_tau_min:.3} is below {MIN_OMEGA_TAU}"));
    }
    FeasibilityReport {
        omega_tau,
        omega_tau_min,
        min_separation,
        max_coupling,
        selectivity_ratio,
        separation_margin,
        amplitudes,
        amplitude_ratios,
        eta: sys.eta(),
        coherence_ratio: tau_phi.map(|t| t / tau),
        feasible: reasons.is_empty(),
        reasons,
    }
}

/// Carrier phases and `θ₁` realising the target gate phases with frame
/// rates `phi` at duration `tau`.
pub fn solve_phases(theta_targets: &[f64; 4], phi: &[f64; 4], tau: f64) -> ([f64; 4], f64) {
    let g: [f64; 4] = std::array::from_fn(|k| wrap(theta_targets[k]));
    let p: [f64; 4] = std::array::from_fn(|k| phase_product(phi[k], tau));
    let theta1 = wrapped_sum(&[g[0], -p[0]]);
    let phi3 = wrapped_sum(&[g[1], -p[1], -theta1]);
    let phi1 = wrapped_sum(&[g[2], -p[2], -theta1]);
    let phi2 = wrapped_sum(&[g[3], -p[3], -theta1, -phi1]);
    let phi4 = wrapped_sum(&[phi1, phi2, -phi3]);
    ([phi1, phi2, phi3, phi4], theta1)
}

/// Builds the design without judging feasibility.
pub fn synthesize(sys: &SpinSystem, target: &GateTarget) -> Result<DesignResult, DesignError> {
    let spec = Spectrum::of(sys);
    let (h1, h2, tau) = (target.h1(), target.h2(), target.tau());
    // provisional frame for the rates; they do not depend on the phases
    let rates = solve_frame(&spec, [0.0; 4], 0.0)?.phi;
    let (phases, theta1) = solve_phases(&target.theta_targets, &rates, tau);
    let frame = solve_frame(&spec, phases, theta1)?;
    // h₁ = γ₁h̃₁ = γ₁h̃₄, h₂ = γ₂h̃₂ = γ₂h̃₃
    let amps = [h1 / sys.gamma1(), h2 / sys.gamma2(), h2 / sys.gamma2(), h1 / sys.gamma1()];
    let pulse = PulseSpec::resonant(&spec, phases, amps, tau)?;
    let global_sign = target.global_sign();
    let predicted = linalg::diag(target.theta_targets.map(|t| linalg::cis(-t) * global_sign));
    let predicted_gate = GateMatrix::new(predicted).map_err(|e| DesignError::InvalidTarget(e.to_string()))?;
    let mut result = DesignResult {
        target: *target,
        pulse,
        frame,
        predicted_gate,
        global_sign,
        feasibility: FeasibilityReport {
            omega_tau: [0.0; 4],
            omega_tau_min: 0.0,
            min_separation: 0.0,
            max_coupling: 0.0,
            selectivity_ratio: 0.0,
            separation_margin: 0.0,
            amplitudes: amps,
            amplitude_ratios: [0.0; 4],
            eta: 0.0,
            coherence_ratio: None,
            feasible: false,
            reasons: Vec::new(),
        },
        notes: vec!["theta1 is taken as freely implementable (timing origin of the pulse)".to_string()],
    };
    if target.m == target.n {
        result.notes.push("m = n: the dynamical phase does not cancel for every basis state".to_string());
    }
    result.feasibility = feasibility_report(sys, &result, None);
    Ok(result)
}

/// Synthesises the pulse and rejects designs outside the RTA regime.
pub fn design(sys: &SpinSystem, target: &GateTarget) -> Result<DesignResult, DesignError> {
    let result = synthesize(sys, target)?;
    if !result.feasibility.feasible {
        let reasons = result.feasibility.reasons.clone();
        return Err(DesignError::Infeasible { result: Box::new(result), reasons });
    }
    Ok(result)
}

/// Controlled-phase gate `A·diag(1, 1, e^{−i(φ₃τ+θ₃)}, e^{−i(φ₄τ+θ₄)})`.
pub fn design_cpg(
    sys: &SpinSystem,
    theta3: f64,
    theta4: f64,
    m: u32,
    n: u32,
    h1: f64,
) -> Result<DesignResult, DesignError> {
    let probe = GateTarget::with_h1([0.0; 4], m, n, h1)?;
    let tau = probe.tau();
    let rates = solve_frame(&Spectrum::of(sys), [0.0; 4], 0.0)?.phi;
    let t3 = wrapped_sum(&[phase_product(rates[2], tau), theta3]);
    let t4 = wrapped_sum(&[phase_product(rates[3], tau), theta4]);
    design(sys, &GateTarget::with_h1([0.0, 0.0, t3, t4], m, n, h1)?)
}

/// Gate with all four phases equal to `aa_phase`: every input returns to
/// its own ray.
pub fn design_aa_with_phase(sys: &SpinSystem, m: u32, n: u32, h1: f64, aa_phase: f64) -> Result<DesignResult, DesignError> {
    design(sys, &GateTarget::with_h1([aa_phase; 4], m, n, h1)?)
}

/// Equal-phase gate with `θ₁ = 0`, so the common phase is `φ₁τ`.
pub fn design_aa(sys: &SpinSystem, m: u32, n: u32, h1: f64) -> Result<DesignResult, DesignError> {
    let tau = GateTarget::with_h1([0.0; 4], m, n, h1)?.tau();
    let rates = solve_frame(&Spectrum::of(sys), [0.0; 4], 0.0)?.phi;
    design_aa_with_phase(sys, m, n, h1, phase_product(rates[0], tau))
}

/// Designs a list of targets in parallel, preserving order.
pub fn design_batch(sys: &SpinSystem, targets: &[GateTarget]) -> Vec<Result<DesignResult, DesignError>> {
    targets.par_iter().map(|t| design(sys, t)).collect()
}

/// Largest wrapped difference between the designed frame's gate phases and
/// the targets.
pub fn target_residual(result: &DesignResult) -> f64 {
    let got = result.frame.gate_phases(result.pulse.tau);
    (0..4).fold(0.0_f64, |m, k| m.max(angle::distance(got[k], result.target.theta_targets[k]).abs()))
}

/// Predicted-gate entries as `(re, im)` pairs, for reporting.
pub fn predicted_diagonal(result: &DesignResult) -> [C64; 4] {
    std::array::from_fn(|k| result.predicted_gate.matrix()[(k, k)])
}
