use std::fmt;

use spinforge_core::designer::DesignError;
use spinforge_core::evolve::EvolveError;
use spinforge_core::phase::PhaseError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_NOT_CYCLIC: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(EXIT_SCHEMA, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::schema(format!("i/o error: {e}"))
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        let code = match e {
            EvolveError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_SCHEMA,
        };
        Self::new(code, e.to_string())
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        let code = match &e {
            PhaseError::NotCyclic { .. } | PhaseError::ConditionUnmet { .. } => EXIT_NOT_CYCLIC,
            PhaseError::GridTooCoarse { .. } => EXIT_NO_CONVERGENCE,
            PhaseError::Evolve(EvolveError::NoConvergence { .. }) => EXIT_NO_CONVERGENCE,
            _ => EXIT_SCHEMA,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        let code = match e {
            DesignError::Infeasible { .. } => EXIT_INFEASIBLE,
            _ => EXIT_SCHEMA,
        };
        Self::new(code, e.to_string())
    }
}

impl From<spinforge_core::model::ModelError> for CliError {
    fn from(e: spinforge_core::model::ModelError) -> Self {
        Self::schema(e.to_string())
    }
}

impl From<spinforge_core::frame::FrameError> for CliError {
    fn from(e: spinforge_core::frame::FrameError) -> Self {
        Self::schema(e.to_string())
    }
}
