//! Simulation and pulse design for non-adiabatic geometric phase gates on a
//! weakly coupled pair of nuclear spins.

pub mod angle;
pub mod designer;
pub mod evolve;
pub mod frame;
pub mod linalg;
pub mod model;
pub mod phase;

pub use designer::{DesignResult, FeasibilityReport, GateTarget};
pub use evolve::{Certificate, GateMatrix, Propagator, StateVector, StepControl, Trajectory};
pub use frame::FrameParams;
pub use model::{PulseSpec, SpinSystem, Spectrum};
pub use phase::{PhaseOptions, PhaseReport};
