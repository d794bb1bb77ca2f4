use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spinforge_core::designer::{self, GateTarget};
use spinforge_core::evolve::{Propagator, StepControl};
use spinforge_core::frame::{solve_frame, FrameParams};
use spinforge_core::{DesignResult, PulseSpec, Spectrum, SpinSystem};

use crate::error::CliError;

/// Frame residual above which a supplied frame is rejected.
const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Design,
    Simulate,
    Phases,
    Verify,
    Sweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Design => "design",
            Task::Simulate => "simulate",
            Task::Phases => "phases",
            Task::Verify => "verify",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    pub system: SpinSystem,
    pub task: Task,
    pub task_payload: P,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a command needs besides its payload.
#[derive(Debug, Clone)]
pub struct Context {
    pub system: SpinSystem,
    pub config_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

impl Context {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Overrides from the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

fn schema_error(err: serde_path_to_error::Error<serde_json::Error>) -> CliError {
    let path = err.path().to_string();
    let inner = err.into_inner();
    CliError::schema(format!("config error at key `{path}`: {inner}"))
}

pub fn parse_doc<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    Ok(value)
}

/// Reads the config, checks that it is meant for `task` and parses the
/// payload as `P`.
pub fn load<P: DeserializeOwned>(path: &Path, task: Task, over: &Overrides) -> Result<(Context, P), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::schema(format!("cannot read {}: {e}", path.display())))?;
    // first pass checks everything but the payload
    let declared: RunConfig<serde::de::IgnoredAny> = parse_doc(&text)?;
    if declared.task != task {
        return Err(CliError::schema(format!(
            "config error at key `task`: config is for `{}` but the `{}` command was run",
            declared.task.name(),
            task.name()
        )));
    }
    let cfg: RunConfig<P> = parse_doc(&text)?;
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let output_dir = match &over.output {
        Some(o) => o.clone(),
        None if cfg.output_dir.is_absolute() => cfg.output_dir.clone(),
        None => config_dir.join(&cfg.output_dir),
    };
    fs::create_dir_all(&output_dir)
        .map_err(|e| CliError::schema(format!("output_dir {} is not writable: {e}", output_dir.display())))?;
    let ctx = Context {
        system: cfg.system,
        config_dir,
        output_dir,
        seed: over.seed.unwrap_or(cfg.seed),
        quiet: over.quiet,
    };
    Ok((ctx, cfg.task_payload))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorName {
    Analytic,
    RtaNumeric,
    ExactNumeric,
}

impl PropagatorName {
    pub fn build(self, include_xy: bool, control: StepControl) -> Result<Propagator, CliError> {
        match self {
            PropagatorName::Analytic | PropagatorName::RtaNumeric if include_xy => {
                Err(CliError::schema("config error at key `task_payload.include_xy`: only exact-numeric has flip-flop terms"))
            }
            PropagatorName::Analytic => Ok(Propagator::Analytic),
            PropagatorName::RtaNumeric => Ok(Propagator::RtaNumeric { control }),
            PropagatorName::ExactNumeric => Ok(Propagator::ExactNumeric { include_xy, control }),
        }
    }
}

/// Where the pulse comes from: an explicit pulse (with optional frame or
/// `θ₁`), a saved design, or a target designed on the spot.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub pulse: Option<PulseSpec>,
    pub theta1: Option<f64>,
    pub frame: Option<FrameParams>,
    pub design: Option<PathBuf>,
    pub target: Option<GateTarget>,
}

impl Source {
    pub fn resolve(&self, ctx: &Context) -> Result<(PulseSpec, FrameParams), CliError> {
        let given = [self.pulse.is_some(), self.design.is_some(), self.target.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::schema(
                "config error at key `task_payload`: exactly one of pulse, design, target must be given",
            ));
        }
        if self.pulse.is_none() && (self.theta1.is_some() || self.frame.is_some()) {
            return Err(CliError::schema(
                "config error at key `task_payload`: theta1 and frame only apply to an explicit pulse",
            ));
        }
        let spec = Spectrum::of(&ctx.system);
        let (pulse, frame) = if let Some(pulse) = self.pulse {
            let frame = match self.frame {
                Some(f) => f,
                None => solve_frame(&spec, pulse.phases(), self.theta1.unwrap_or(0.0))?,
            };
            (pulse, frame)
        } else if let Some(path) = &self.design {
            let path = ctx.resolve(path);
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::schema(format!("cannot read design {}: {e}", path.display())))?;
            let result: DesignResult = parse_doc(&text)
                .map_err(|e| CliError::schema(format!("design {}: {}", path.display(), e.message)))?;
            (result.pulse, result.frame)
        } else {
            let target = self.target.expect("one source is present");
            let result = designer::design(&ctx.system, &target)?;
            (result.pulse, result.frame)
        };
        let residual = frame.max_residual(&spec, &pulse.phases());
        if !(residual <= FRAME_TOL) {
            return Err(CliError::schema(format!(
                "config error at key `task_payload`: frame does not match the pulse on this system (residual {residual:e})"
            )));
        }
        Ok((pulse, frame))
    }
}
