use serde::{Deserialize, Serialize};
use spinforge_core::designer::{self, feasibility_report, DesignError, GateTarget};
use spinforge_core::DesignResult;

use crate::config::Context;
use crate::error::{CliError, EXIT_INFEASIBLE};
use crate::output::write_json;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpgSpec {
    pub theta3: f64,
    pub theta4: f64,
    pub m: u32,
    pub n: u32,
    pub h1: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaSpec {
    pub m: u32,
    pub n: u32,
    pub h1: f64,
    /// Common gate phase; defaults to the one reached with `θ₁ = 0`.
    #[serde(default)]
    pub phase: Option<f64>,
}

/// Exactly one of `target`, `cpg`, `aa`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPayload {
    #[serde(default)]
    pub target: Option<GateTarget>,
    #[serde(default)]
    pub cpg: Option<CpgSpec>,
    #[serde(default)]
    pub aa: Option<AaSpec>,
    /// Coherence time, for the `τ_φ/τ` figure in the feasibility report.
    #[serde(default)]
    pub tau_phi: Option<f64>,
}

pub fn run(ctx: &Context, payload: &DesignPayload) -> Result<(), CliError> {
    let sys = &ctx.system;
    if let Some(tp) = payload.tau_phi {
        if !(tp.is_finite() && tp > 0.0) {
            return Err(CliError::schema(format!(
                "config error at key `task_payload.tau_phi`: must be positive, got {tp}"
            )));
        }
    }
    let outcome = match (payload.target, payload.cpg, payload.aa) {
        (Some(t), None, None) => designer::design(sys, &t),
        (None, Some(c), None) => designer::design_cpg(sys, c.theta3, c.theta4, c.m, c.n, c.h1),
        (None, None, Some(a)) => match a.phase {
            Some(p) => designer::design_aa_with_phase(sys, a.m, a.n, a.h1, p),
            None => designer::design_aa(sys, a.m, a.n, a.h1),
        },
        _ => {
            return Err(CliError::schema(
                "config error at key `task_payload`: exactly one of target, cpg, aa must be given",
            ))
        }
    };
    let (result, failure) = match outcome {
        Ok(r) => (r, None),
        Err(DesignError::Infeasible { result, reasons }) => {
            let msg = format!("design is not physically feasible: {}", reasons.join("; "));
            (*result, Some(CliError::new(EXIT_INFEASIBLE, msg)))
        }
        Err(e) => return Err(e.into()),
    };
    write_outputs(ctx, result, payload.tau_phi)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_outputs(ctx: &Context, mut result: DesignResult, tau_phi: Option<f64>) -> Result<(), CliError> {
    result.feasibility = feasibility_report(&ctx.system, &result, tau_phi);
    write_json(&ctx.output_dir.join("design.json"), &result)?;
    write_json(&ctx.output_dir.join("feasibility.json"), &result.feasibility)?;
    let f = &result.feasibility;
    ctx.say(format!(
        "design: tau = {:.6e}, amplitudes = {:?}, feasible = {}",
        result.pulse.tau, f.amplitudes, f.feasible
    ));
    Ok(())
}
