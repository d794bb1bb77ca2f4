use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinforge_core::designer::GateTarget;
use spinforge_core::evolve::{analytic_gate, fidelity, gate_tomography, Propagator, UNITARY_TOL};
use spinforge_core::frame::FrameParams;
use spinforge_core::{Certificate, GateMatrix, PulseSpec, StateVector, StepControl};

use crate::config::{Context, PropagatorName, Source};
use crate::error::CliError;
use crate::output::write_json;

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatePayload {
    pub propagator: PropagatorName,
    #[serde(default)]
    pub include_xy: bool,
    #[serde(default)]
    pub step_control: StepControl,
    #[serde(default)]
    pub pulse: Option<PulseSpec>,
    #[serde(default)]
    pub theta1: Option<f64>,
    #[serde(default)]
    pub frame: Option<FrameParams>,
    #[serde(default)]
    pub design: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<GateTarget>,
    /// Logical input state; `|00>` when absent.
    #[serde(default)]
    pub input: Option<StateVector>,
    /// End of the trajectory; defaults to the pulse duration.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Approximate number of trajectory rows.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl SimulatePayload {
    fn source(&self) -> Source {
        Source {
            pulse: self.pulse,
            theta1: self.theta1,
            frame: self.frame,
            design: self.design.clone(),
            target: self.target,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct XyDiagnostics {
    pub eta: f64,
    pub eta_squared: f64,
    pub infidelity_with_xy: f64,
    pub infidelity_without_xy: f64,
    /// `infidelity_with_xy − infidelity_without_xy`.
    pub xy_shift: f64,
    pub xy_shift_over_eta_squared: f64,
}

#[derive(Debug, Serialize)]
pub struct GateReport {
    pub propagator: String,
    pub tau: f64,
    pub gate: GateMatrix,
    pub diagonal_phases: [f64; 4],
    /// `φ_kτ + θ_k` from the frame.
    pub frame_phases: [f64; 4],
    pub unitarity_defect: f64,
    pub unitarity_tolerance: f64,
    pub off_diagonal_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    /// `1 − |tr(G_analytic† G)|/4`; absent for asymmetric couplings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infidelity_vs_analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy_diagnostics: Option<XyDiagnostics>,
}

pub fn run(ctx: &Context, payload: &SimulatePayload) -> Result<(), CliError> {
    let sys = &ctx.system;
    let (pulse, frame) = payload.source().resolve(ctx)?;
    let t_end = payload.t_end.unwrap_or(pulse.tau);
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(CliError::schema(format!("config error at key `task_payload.t_end`: invalid value {t_end}")));
    }
    if payload.samples == 0 {
        return Err(CliError::schema("config error at key `task_payload.samples`: must be at least 1"));
    }
    let propagator = payload.propagator.build(payload.include_xy, payload.step_control)?;
    let psi0 = payload.input.unwrap_or_else(|| StateVector::basis(0));

    let traj_prop = with_stride(&propagator, sys, &pulse, t_end, payload.samples);
    let traj = traj_prop.trajectory(sys, &pulse, &frame, &psi0, t_end, payload.samples)?;
    let mut w = BufWriter::new(File::create(ctx.output_dir.join("trajectory.csv"))?);
    traj.write_csv(&mut w)?;

    let (gate, certificate) = gate_tomography(&propagator, sys, &pulse, &frame)?;
    let reference = analytic_gate(sys, &pulse, &frame).ok().and_then(|g| GateMatrix::new(g).ok());
    let infidelity_vs_analytic = reference.as_ref().map(|r| 1.0 - fidelity(r, &gate));
    let xy_diagnostics = match (propagator, &reference) {
        (Propagator::ExactNumeric { include_xy: true, control }, Some(r)) => {
            let plain = Propagator::ExactNumeric { include_xy: false, control };
            let (g0, _) = gate_tomography(&plain, sys, &pulse, &frame)?;
            let with = 1.0 - fidelity(r, &gate);
            let without = 1.0 - fidelity(r, &g0);
            let eta = sys.eta();
            Some(XyDiagnostics {
                eta,
                eta_squared: eta * eta,
                infidelity_with_xy: with,
                infidelity_without_xy: without,
                xy_shift: with - without,
                xy_shift_over_eta_squared: (with - without) / (eta * eta),
            })
        }
        _ => None,
    };
    let report = GateReport {
        propagator: propagator.label().to_string(),
        tau: pulse.tau,
        diagonal_phases: gate.diagonal_phases(),
        frame_phases: frame.gate_phases(pulse.tau),
        unitarity_defect: gate.unitarity_defect(),
        unitarity_tolerance: UNITARY_TOL,
        off_diagonal_mass: gate.off_diagonal_mass(),
        certificate,
        infidelity_vs_analytic,
        xy_diagnostics,
        gate,
    };
    write_json(&ctx.output_dir.join("gate.json"), &report)?;
    ctx.say(format!(
        "simulate: {} rows, off-diagonal mass {:.3e}, unitarity defect {:.3e}",
        traj.len(),
        report.off_diagonal_mass,
        report.unitarity_defect
    ));
    Ok(())
}

/// Numeric propagator whose sample stride gives roughly `samples` rows.
fn with_stride(p: &Propagator, sys: &spinforge_core::SpinSystem, pulse: &PulseSpec, t_end: f64, samples: usize) -> Propagator {
    let Some((h, control)) = p.driven(sys, pulse) else {
        return *p;
    };
    // the accepted run of a certified pair uses twice the base step count
    let factor = if control.certify { 2.0 } else { 1.0 };
    let steps = h.fastest_frequency() / (2.0 * std::f64::consts::PI) * t_end * control.steps_per_period as f64 * factor;
    let stride = ((steps / samples as f64).floor() as usize).max(1);
    let control = StepControl { sample_stride: stride, ..control };
    match *p {
        Propagator::RtaNumeric { .. } => Propagator::RtaNumeric { control },
        Propagator::ExactNumeric { include_xy, .. } => Propagator::ExactNumeric { include_xy, control },
        Propagator::Analytic => Propagator::Analytic,
    }
}
