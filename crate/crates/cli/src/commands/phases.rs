use std::path::PathBuf;

use serde::Deserialize;
use spinforge_core::designer::GateTarget;
use spinforge_core::frame::FrameParams;
use spinforge_core::phase::decompose_with;
use spinforge_core::{PhaseOptions, PulseSpec, StepControl};

use crate::config::{Context, PropagatorName, Source};
use crate::error::CliError;
use crate::output::write_json;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasesPayload {
    pub propagator: PropagatorName,
    #[serde(default)]
    pub include_xy: bool,
    #[serde(default)]
    pub step_control: StepControl,
    #[serde(default)]
    pub options: PhaseOptions,
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
}

pub fn run(ctx: &Context, payload: &PhasesPayload) -> Result<(), CliError> {
    let source = Source {
        pulse: payload.pulse,
        theta1: payload.theta1,
        frame: payload.frame,
        design: payload.design.clone(),
        target: payload.target,
    };
    let (pulse, frame) = source.resolve(ctx)?;
    let propagator = payload.propagator.build(payload.include_xy, payload.step_control)?;
    let report = decompose_with(&ctx.system, &pulse, &frame, &propagator, &payload.options)?;
    write_json(&ctx.output_dir.join("phases.json"), &report)?;
    ctx.say(format!("phases: delta_D = {:?}, (m, n) = ({}, {})", report.delta_d, report.m, report.n));
    for w in &report.warnings {
        ctx.say(format!("warning: {w}"));
    }
    Ok(())
}
