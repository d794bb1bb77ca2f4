use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spinforge_core::angle::{distance, wrap};
use spinforge_core::designer::{self, target_residual, GateTarget};
use spinforge_core::evolve::{coeffs_analytic, fidelity, gate_tomography, rotating_propagator, Propagator};
use spinforge_core::frame::{
    coefficient_matrix, eigensystem_general, eigensystem_symmetric, phase_closure, rotate, rotating_hamiltonian_at,
    solve_frame, static_rotating_matrix, FrameParams,
};
use spinforge_core::linalg::{self, cis, max_abs, C64, Mat4, RealMat4, Vec4};
use spinforge_core::model::{hamiltonian_exact, static_hamiltonian, GUARD_BAND_FACTOR};
use spinforge_core::phase::{decompose, term_integrals, QUADRATURE_TOL};
use spinforge_core::{DesignResult, PulseSpec, Spectrum, SpinSystem, StateVector, StepControl};

use crate::config::Context;
use crate::error::{CliError, EXIT_VERIFY};
use crate::output::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Negates the rotating-frame transformation before checking that the
    /// transformed Hamiltonian is static.
    FlipRotatingFrameSign,
}

fn default_samples() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyPayload {
    /// Random draws per randomized invariant.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Spin-1 coupling for the checks at `(m, n) = (1, 2)`; defaults to the
    /// largest value inside the guard band with some margin.
    #[serde(default)]
    pub h1: Option<f64>,
    #[serde(default)]
    pub fault: Option<Fault>,
}

impl Default for VerifyPayload {
    fn default() -> Self {
        Self { samples: default_samples(), h1: None, fault: None }
    }
}

#[derive(Debug, Serialize)]
pub struct InvariantResult {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
    pub passed: bool,
    pub failed: usize,
    pub invariants: Vec<InvariantResult>,
}

struct Setup {
    sys: SpinSystem,
    spec: Spectrum,
    h1: f64,
    h2: f64,
    tau: f64,
    pulse: PulseSpec,
    frame: FrameParams,
    /// `max|ε|·τ`, the natural scale of the dynamical phase.
    phase_scale: f64,
    samples: usize,
    fault: Option<Fault>,
}

type Outcome = Result<(f64, f64), String>;
type Invariant = fn(&Setup, &mut ChaCha8Rng) -> Outcome;

fn random_phases(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-PI..PI));
    [p[0], p[1], p[2], wrap(p[0] + p[1] - p[2])]
}

fn amplitudes(sys: &SpinSystem, h1: f64, h2: f64) -> [f64; 4] {
    [h1 / sys.gamma1(), h2 / sys.gamma2(), h2 / sys.gamma2(), h1 / sys.gamma1()]
}

fn cyclic_pulse(s: &Setup, m: u32, n: u32, phases: [f64; 4]) -> Result<PulseSpec, String> {
    let tau = 2.0 * PI * m as f64 / s.h1;
    let h2 = 2.0 * PI * n as f64 / tau;
    PulseSpec::resonant(&s.spec, phases, amplitudes(&s.sys, s.h1, h2), tau).map_err(|e| e.to_string())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spectrum_closed_form(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let h = static_hamiltonian(&s.sys, false);
    let scale = s.spec.eps.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
    let r = max_abs(&(h - linalg::diag(s.spec.eps.map(|e| C64::new(e, 0.0)))));
    Ok((r / scale, 1e-15))
}

fn exact_hamiltonian_hermitian(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let t = rng.gen_range(0.0..s.tau);
        let h = hamiltonian_exact(&s.sys, &s.pulse, t, true);
        worst = worst.max(linalg::hermiticity_defect(&h) / max_abs(&h).max(1.0));
    }
    Ok((worst, 1e-15))
}

fn rta_couplings_symmetric(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let h = s.pulse.rta_couplings(&s.sys);
    let r = ((h[0] - h[3]).abs() + (h[1] - h[2]).abs()) / h[1].abs().max(h[0].abs());
    Ok((r, 1e-12))
}

fn rotating_frame_static(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let frame = match s.fault {
        Some(Fault::FlipRotatingFrameSign) => FrameParams { phi: s.frame.phi.map(|p| -p), theta: s.frame.theta.map(|t| -t) },
        None => s.frame,
    };
    let h = s.pulse.rta_couplings(&s.sys);
    let scale = h.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let h0 = rotating_hamiltonian_at(&s.sys, &s.pulse, &frame, 0.0);
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let t = rng.gen_range(0.0..s.tau);
        worst = worst.max(max_abs(&(rotating_hamiltonian_at(&s.sys, &s.pulse, &frame, t) - h0)) / scale);
    }
    if worst <= 1e-9 {
        // the library's own static check must agree
        rotate(&s.sys, &s.pulse, &frame).map_err(err)?;
    }
    Ok((worst, 1e-9))
}

fn rotating_matrix_matches_couplings(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let h = s.pulse.rta_couplings(&s.sys);
    let scale = h.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let got = rotate(&s.sys, &s.pulse, &s.frame).map_err(err)?;
    let want = linalg::to_complex(&static_rotating_matrix(h));
    Ok((max_abs(&(got - want)) / scale, 1e-9))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn general_eigenvalues(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let h: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.01..1.0));
        let closed = sorted(eigensystem_general(h).map_err(err)?.to_vec());
        let numeric = sorted(static_rotating_matrix(h).symmetric_eigen().eigenvalues.iter().copied().collect());
        for (a, b) in closed.iter().zip(&numeric) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst, 1e-12))
}

fn symmetric_eigenvectors(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let (h1, h2) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
        let es = eigensystem_symmetric(h1, h2);
        let m = static_rotating_matrix([h1, h2, h2, h1]);
        for j in 0..4 {
            let v = es.vectors.row(j).transpose();
            worst = worst.max((m * v - v * es.energies[j]).amax());
        }
    }
    Ok((worst, 1e-15))
}

fn coefficient_involution(_: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let c = coefficient_matrix();
    Ok(((c * c - RealMat4::identity()).amax(), 1e-15))
}

fn coefficients_vs_eigen_expansion(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let (h1, h2, t) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.0..100.0));
        let es = eigensystem_symmetric(h1, h2);
        let c = es.vectors;
        for i in 0..4 {
            let got = coeffs_analytic(h1, h2, t, i);
            for (k, g) in got.iter().enumerate() {
                let want: C64 = (0..4).map(|j| cis(-es.energies[j] * t) * (c[(j, k)] * c[(j, i)])).sum();
                worst = worst.max((g - want).norm());
            }
        }
    }
    Ok((worst, 1e-12))
}

fn rotating_propagator_unitary(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let w = rotating_propagator(rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.0..100.0));
        worst = worst.max(linalg::unitarity_defect(&w));
    }
    Ok((worst, 1e-13))
}

fn return_defect(h1: f64, h2: f64, tau: f64, m: u32, n: u32) -> f64 {
    let a = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
    max_abs(&(rotating_propagator(h1, h2, tau) - Mat4::identity() * C64::new(a, 0.0)))
}

fn terminal_values(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    Ok((return_defect(s.h1, s.h2, s.tau, 1, 2), 1e-12))
}

fn terminal_values_random_orders(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let (m, n) = (rng.gen_range(1..=5u32), rng.gen_range(1..=5u32));
        let h1 = rng.gen_range(0.05..1.0);
        let tau = 2.0 * PI * m as f64 / h1;
        worst = worst.max(return_defect(h1, 2.0 * PI * n as f64 / tau, tau, m, n));
    }
    Ok((worst, 1e-11))
}

fn term_integrals_quarter(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for i in 0..4 {
        let (d, _) = term_integrals(&s.sys, s.h1, s.h2, s.tau, i, 4096);
        for k in 0..4 {
            worst = worst.max((d[k] - s.spec.eps[k] * s.tau / 4.0).abs() / s.phase_scale);
        }
    }
    Ok((worst, 1e-12))
}

fn cross_terms_vanish(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for i in 0..4 {
        let (_, x) = term_integrals(&s.sys, s.h1, s.h2, s.tau, i, 4096);
        worst = worst.max(x[0].norm().max(x[1].norm()) / s.phase_scale);
    }
    Ok((worst, 1e-12))
}

fn dynamical_phase_cancels(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let r = decompose(&s.sys, &s.pulse, &s.frame, &Propagator::Analytic).map_err(err)?;
    let worst = r.delta_d.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    Ok((worst / s.phase_scale, QUADRATURE_TOL))
}

fn dynamical_phase_equal_orders(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let phases = random_phases(rng);
    let pulse = cyclic_pulse(s, 1, 1, phases)?;
    let frame = solve_frame(&s.spec, phases, 0.0).map_err(err)?;
    let r = decompose(&s.sys, &pulse, &frame, &Propagator::Analytic).map_err(err)?;
    let expect = s.sys.j() * pulse.tau / 4.0;
    let scale = s.spec.eps.iter().fold(0.0_f64, |m, e| m.max(e.abs())) * pulse.tau;
    Ok(((r.delta_d[0] - expect).abs() / scale, QUADRATURE_TOL))
}

fn phase_sum_rule(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let r = decompose(&s.sys, &s.pulse, &s.frame, &Propagator::Analytic).map_err(err)?;
    let worst = (0..4).fold(0.0_f64, |m, i| m.max(distance(r.beta[i], r.delta_d[i] + r.delta_g[i]).abs()));
    Ok((worst, 1e-12))
}

fn analytic_gate_diagonal(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let (g, _) = gate_tomography(&Propagator::Analytic, &s.sys, &s.pulse, &s.frame).map_err(err)?;
    let theta = s.frame.gate_phases(s.tau);
    let want = linalg::diag(theta.map(|t| -cis(-t)));
    Ok((g.off_diagonal_mass().max(max_abs(&(g.matrix() - want))), 1e-9))
}

fn random_target(s: &Setup, rng: &mut ChaCha8Rng) -> Result<GateTarget, String> {
    let th: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-PI..PI));
    GateTarget::with_h1(th, 1, 2, s.h1).map_err(err)
}

fn designs(s: &Setup, rng: &mut ChaCha8Rng) -> Result<Vec<DesignResult>, String> {
    (0..s.samples).map(|_| designer::synthesize(&s.sys, &random_target(s, rng)?).map_err(err)).collect()
}

fn design_round_trip(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let worst = designs(s, rng)?.iter().fold(0.0_f64, |m, d| m.max(target_residual(d)));
    Ok((worst, 1e-9))
}

fn designed_phase_closure(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let worst = designs(s, rng)?.iter().fold(0.0_f64, |m, d| m.max(phase_closure(&d.pulse.phases()).abs()));
    Ok((worst, 1e-12))
}

fn designed_gate_matches_prediction(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for d in designs(s, rng)? {
        let (g, _) = gate_tomography(&Propagator::Analytic, &s.sys, &d.pulse, &d.frame).map_err(err)?;
        worst = worst.max(1.0 - fidelity(&d.predicted_gate, &g));
    }
    Ok((worst, 1e-12))
}

fn amplitude_ratio(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let d = designer::synthesize(&s.sys, &random_target(s, rng)?).map_err(err)?;
    let a = d.pulse.amplitudes();
    let want = 2.0 * s.sys.gamma1() / s.sys.gamma2();
    Ok(((a[1] / a[0] - want).abs() / want, 1e-12))
}

fn gauge_covariance(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let shift = rng.gen_range(-PI..PI);
    let phases = s.pulse.phases();
    let shifted = solve_frame(&s.spec, phases, s.frame.theta[0] + shift).map_err(err)?;
    let (g0, _) = gate_tomography(&Propagator::Analytic, &s.sys, &s.pulse, &s.frame).map_err(err)?;
    let (g1, _) = gate_tomography(&Propagator::Analytic, &s.sys, &s.pulse, &shifted).map_err(err)?;
    Ok((max_abs(&(g1.matrix() - g0.matrix() * cis(-shift))), 1e-12))
}

fn json_round_trip(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let d = designer::synthesize(&s.sys, &random_target(s, rng)?).map_err(err)?;
    let text = serde_json::to_string(&d).map_err(err)?;
    let back: DesignResult = serde_json::from_str(&text).map_err(err)?;
    Ok((if back == d { 0.0 } else { 1.0 }, 0.0))
}

fn analytic_norm_preserved(s: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..s.samples {
        let v = Vec4::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let psi = StateVector::from_unnormalized(v).map_err(err)?;
        let t = rng.gen_range(0.0..1.5 * s.tau);
        let out = Propagator::Analytic.evolve(&s.sys, &s.pulse, &s.frame, &psi, t).map_err(err)?;
        worst = worst.max((out.norm() - 1.0).abs());
    }
    Ok((worst, 1e-12))
}

/// Runs on a fixed small system so that the cost does not depend on the
/// configured Zeeman scale.
fn rta_numeric_matches_closed_form(_: &Setup, rng: &mut ChaCha8Rng) -> Outcome {
    let sys = SpinSystem::new(50.0, 12.5, 1.0, 1.0, 0.25).map_err(err)?;
    let spec = Spectrum::of(&sys);
    let (h1, h2) = (0.1, 0.2);
    let phases = random_phases(rng);
    let pulse = PulseSpec::resonant(&spec, phases, amplitudes(&sys, h1, h2), 2.0 * PI / h1).map_err(err)?;
    let frame = solve_frame(&spec, phases, rng.gen_range(-PI..PI)).map_err(err)?;
    let (a, _) = gate_tomography(&Propagator::Analytic, &sys, &pulse, &frame).map_err(err)?;
    let numeric = Propagator::RtaNumeric { control: StepControl::default() };
    let (b, _) = gate_tomography(&numeric, &sys, &pulse, &frame).map_err(err)?;
    Ok((max_abs(&(a.matrix() - b.matrix())), 1e-7))
}

fn gate_matrix_unitary(s: &Setup, _: &mut ChaCha8Rng) -> Outcome {
    let (g, _) = gate_tomography(&Propagator::Analytic, &s.sys, &s.pulse, &s.frame).map_err(err)?;
    Ok((g.unitarity_defect(), 1e-12))
}

const INVARIANTS: &[(&str, Invariant)] = &[
    ("spectrum_closed_form", spectrum_closed_form),
    ("exact_hamiltonian_hermitian", exact_hamiltonian_hermitian),
    ("rta_couplings_symmetric", rta_couplings_symmetric),
    ("rotating_frame_static", rotating_frame_static),
    ("rotating_matrix_matches_couplings", rotating_matrix_matches_couplings),
    ("general_eigenvalues", general_eigenvalues),
    ("symmetric_eigenvectors", symmetric_eigenvectors),
    ("coefficient_involution", coefficient_involution),
    ("coefficients_vs_eigen_expansion", coefficients_vs_eigen_expansion),
    ("rotating_propagator_unitary", rotating_propagator_unitary),
    ("terminal_values", terminal_values),
    ("terminal_values_random_orders", terminal_values_random_orders),
    ("term_integrals_quarter", term_integrals_quarter),
    ("cross_terms_vanish", cross_terms_vanish),
    ("dynamical_phase_cancels", dynamical_phase_cancels),
    ("dynamical_phase_equal_orders", dynamical_phase_equal_orders),
    ("phase_sum_rule", phase_sum_rule),
    ("analytic_gate_diagonal", analytic_gate_diagonal),
    ("gate_matrix_unitary", gate_matrix_unitary),
    ("design_round_trip", design_round_trip),
    ("designed_phase_closure", designed_phase_closure),
    ("designed_gate_matches_prediction", designed_gate_matches_prediction),
    ("amplitude_ratio", amplitude_ratio),
    ("gauge_covariance", gauge_covariance),
    ("json_round_trip", json_round_trip),
    ("analytic_norm_preserved", analytic_norm_preserved),
    ("rta_numeric_matches_closed_form", rta_numeric_matches_closed_form),
];

fn setup(ctx: &Context, payload: &VerifyPayload, rng: &mut ChaCha8Rng) -> Result<Setup, CliError> {
    let sys = ctx.system;
    let spec = Spectrum::of(&sys);
    // h₂ = 2h₁ is the strongest coupling at (m, n) = (1, 2)
    let h1 = payload.h1.unwrap_or(spec.min_separation() / (2.5 * GUARD_BAND_FACTOR));
    if !(h1.is_finite() && h1 > 0.0) {
        return Err(CliError::schema(format!(
            "config error at key `task_payload.h1`: need a positive coupling, got {h1} (is the spectrum degenerate?)"
        )));
    }
    let tau = 2.0 * PI / h1;
    let h2 = 2.0 * h1;
    let phases = random_phases(rng);
    let pulse = PulseSpec::resonant(&spec, phases, amplitudes(&sys, h1, h2), tau)?;
    let frame = solve_frame(&spec, phases, rng.gen_range(-PI..PI))?;
    let phase_scale = spec.eps.iter().fold(0.0_f64, |m, e| m.max(e.abs())) * tau;
    Ok(Setup { sys, spec, h1, h2, tau, pulse, frame, phase_scale, samples: payload.samples.max(1), fault: payload.fault })
}

pub fn run(ctx: &Context, payload: &VerifyPayload) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let s = setup(ctx, payload, &mut rng)?;
    let mut invariants = Vec::with_capacity(INVARIANTS.len());
    for &(name, check) in INVARIANTS {
        // each invariant draws from its own stream so that adding one does
        // not shift the samples of the others
        let mut sub = ChaCha8Rng::seed_from_u64(ctx.seed);
        sub.set_stream(invariants.len() as u64 + 1);
        let r = match check(&s, &mut sub) {
            Ok((residual, tolerance)) => InvariantResult {
                name,
                passed: residual <= tolerance,
                residual,
                tolerance,
                detail: None,
            },
            Err(e) => InvariantResult { name, passed: false, residual: f64::NAN, tolerance: f64::NAN, detail: Some(e) },
        };
        ctx.say(format!(
            "[{}] {name}: residual {:.3e} (tolerance {:.1e}){}",
            if r.passed { "PASS" } else { "FAIL" },
            r.residual,
            r.tolerance,
            r.detail.as_deref().map(|d| format!(" {d}")).unwrap_or_default()
        ));
        invariants.push(r);
    }
    let failed = invariants.iter().filter(|r| !r.passed).count();
    let report = VerifyReport {
        seed: ctx.seed,
        samples: s.samples,
        fault: payload.fault,
        passed: failed == 0,
        failed,
        invariants,
    };
    write_json(&ctx.output_dir.join("verify.json"), &report)?;
    if failed > 0 {
        return Err(CliError::new(EXIT_VERIFY, format!("{failed} of {} invariants failed", report.invariants.len())));
    }
    Ok(())
}
