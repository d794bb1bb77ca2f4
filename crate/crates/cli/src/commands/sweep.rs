use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinforge_core::designer::{self, Drive, GateTarget};
use spinforge_core::evolve::{gate_tomography, propagate_unitary, DrivenHamiltonian, HamiltonianKind, Propagator};
use spinforge_core::linalg::{unitarity_defect, Mat4};
use spinforge_core::phase::decompose;
use spinforge_core::{SpinSystem, StepControl};

use crate::config::Context;
use crate::error::CliError;
use crate::output::{csv_text, fmt_f64, fmt_opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Absolute spin-1 coupling `h₁`.
    H1,
    /// Multiplier on the target's `h₁`.
    H1Scale,
    /// Ising coupling `J`.
    J,
    /// Fixed step count of an uncertified exact run.
    StepsPerPeriod,
}

impl SweepParameter {
    fn name(self) -> &'static str {
        match self {
            SweepParameter::H1 => "h1",
            SweepParameter::H1Scale => "h1_scale",
            SweepParameter::J => "j",
            SweepParameter::StepsPerPeriod => "steps_per_period",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPayload {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Base design; must give `h1`.
    pub target: GateTarget,
    #[serde(default)]
    pub include_xy: bool,
    /// Also run with the flip-flop terms toggled and report the shift.
    #[serde(default)]
    pub compare_xy: bool,
    #[serde(default)]
    pub step_control: StepControl,
    /// Reference step count for a steps-per-period sweep; defaults to four
    /// times the largest grid value.
    #[serde(default)]
    pub reference_steps_per_period: Option<u32>,
    /// In a `j` sweep, scale `h₁` with `J` so that the transition spacing
    /// over the drive strength stays fixed.
    #[serde(default = "yes")]
    pub hold_selectivity: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default)]
struct Row {
    feasible: Option<bool>,
    infidelity: Option<f64>,
    infidelity_toggled: Option<f64>,
    unitarity_defect: Option<f64>,
    delta_d_residual: Option<f64>,
    state_difference: Option<f64>,
    wall_time: f64,
    error: Option<String>,
}

const HEADER: &str = "index,parameter,value,feasible,infidelity,infidelity_xy_toggled,xy_shift,unitarity_defect,delta_d_residual,state_difference,wall_time_s,error";

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("SPINFORGE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::schema(format!("SPINFORGE_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn validate(payload: &SweepPayload) -> Result<(), CliError> {
    if payload.values.is_empty() {
        return Err(CliError::schema("config error at key `task_payload.values`: grid is empty"));
    }
    if !matches!(payload.target.drive, Drive::H1(_)) {
        return Err(CliError::schema("config error at key `task_payload.target`: sweep targets must give h1"));
    }
    for (i, v) in payload.values.iter().enumerate() {
        let ok = match payload.parameter {
            SweepParameter::J => v.is_finite() && *v >= 0.0,
            SweepParameter::StepsPerPeriod => *v >= 1.0 && v.fract() == 0.0 && *v <= u32::MAX as f64,
            _ => v.is_finite() && *v > 0.0,
        };
        if !ok {
            return Err(CliError::schema(format!(
                "config error at key `task_payload.values[{i}]`: invalid {} value {v}",
                payload.parameter.name()
            )));
        }
    }
    Ok(())
}

pub fn run(ctx: &Context, payload: &SweepPayload) -> Result<(), CliError> {
    validate(payload)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::schema(format!("thread pool: {e}")))?;
    // the reference run of a steps-per-period sweep is shared by every row
    let fine = OnceLock::new();
    let rows: Vec<Row> = pool.install(|| {
        payload
            .values
            .par_iter()
            .map(|&v| {
                let start = Instant::now();
                let mut row = evaluate(&ctx.system, payload, v, &fine).unwrap_or_else(|e| Row { error: Some(e), ..Row::default() });
                row.wall_time = start.elapsed().as_secs_f64();
                row
            })
            .collect()
    });

    let mut w = BufWriter::new(File::create(ctx.output_dir.join("sweep.csv"))?);
    writeln!(w, "{HEADER}")?;
    for (i, (v, r)) in payload.values.iter().zip(&rows).enumerate() {
        let shift = r.infidelity.zip(r.infidelity_toggled).map(|(a, b)| if payload.include_xy { a - b } else { b - a });
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            payload.parameter.name(),
            fmt_f64(*v),
            r.feasible.map(|f| f.to_string()).unwrap_or_default(),
            fmt_opt(r.infidelity),
            fmt_opt(r.infidelity_toggled),
            fmt_opt(shift),
            fmt_opt(r.unitarity_defect),
            fmt_opt(r.delta_d_residual),
            fmt_opt(r.state_difference),
            fmt_f64(r.wall_time),
            csv_text(r.error.as_deref().unwrap_or("")),
        )?;
    }
    w.flush()?;
    let ok = rows.iter().filter(|r| r.error.is_none()).count();
    ctx.say(format!("sweep: {ok} of {} rows succeeded", rows.len()));
    if ok == 0 {
        return Err(CliError::schema(format!(
            "every sweep row failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn max_column_norm(m: &Mat4) -> f64 {
    (0..4).fold(0.0_f64, |acc, c| acc.max(m.column(c).norm()))
}

fn evaluate(base: &SpinSystem, p: &SweepPayload, value: f64, fine: &OnceLock<Result<Mat4, String>>) -> Result<Row, String> {
    let mut sys = *base;
    let mut target = p.target;
    let mut control = p.step_control;
    match p.parameter {
        SweepParameter::H1 => target.drive = Drive::H1(value),
        SweepParameter::H1Scale => target.drive = Drive::H1(p.target.h1() * value),
        SweepParameter::J => {
            sys = base.with_j(value).map_err(err)?;
            if p.hold_selectivity {
                target.drive = Drive::H1(p.target.h1() * value / base.j());
            }
        }
        SweepParameter::StepsPerPeriod => control = StepControl::fixed(value as u32, control.picture),
    }
    let target = GateTarget::new(target.theta_targets, target.m, target.n, target.drive).map_err(err)?;
    let d = designer::synthesize(&sys, &target).map_err(err)?;
    let (reference, _) = gate_tomography(&Propagator::Analytic, &sys, &d.pulse, &d.frame).map_err(err)?;
    // raw lab-frame gate U(τ, 0)·U†(0); coarse fixed-step runs need not be unitary
    let u0 = d.frame.diagonal(0.0);
    let exact = |xy: bool, control: StepControl| -> Result<Mat4, String> {
        let h = DrivenHamiltonian::new(&sys, &d.pulse, HamiltonianKind::Exact { include_xy: xy });
        let (u, _) = propagate_unitary(&h, (0.0, d.pulse.tau), &control).map_err(err)?;
        Ok(Mat4::from_fn(|r, c| u[(r, c)] * u0[c].conj()))
    };
    let infidelity = |g: &Mat4| 1.0 - (reference.matrix().adjoint() * g).trace().norm() / 4.0;
    let gate = exact(p.include_xy, control)?;
    let infidelity_toggled = if p.compare_xy { Some(infidelity(&exact(!p.include_xy, control)?)) } else { None };
    let state_difference = if p.parameter == SweepParameter::StepsPerPeriod {
        let top = p.values.iter().fold(0.0_f64, |m, v| m.max(*v)) as u32;
        let spp = p.reference_steps_per_period.unwrap_or(top.saturating_mul(4));
        let fine = fine.get_or_init(|| exact(p.include_xy, StepControl::fixed(spp, control.picture))).clone()?;
        Some(max_column_norm(&(fine - gate)))
    } else {
        None
    };
    let phases = decompose(&sys, &d.pulse, &d.frame, &Propagator::Analytic).map_err(err)?;
    Ok(Row {
        feasible: Some(d.feasibility.feasible),
        infidelity: Some(infidelity(&gate)),
        infidelity_toggled,
        unitarity_defect: Some(unitarity_defect(&gate)),
        delta_d_residual: Some(phases.delta_d.iter().fold(0.0_f64, |m, x| m.max(x.abs()))),
        state_difference,
        wall_time: 0.0,
        error: None,
    })
}
