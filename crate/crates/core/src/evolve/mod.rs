//! Time evolution: closed-form RTA solution, fixed-step RK4 integration of the
//! RTA and exact Hamiltonians, and gate tomography.

pub mod analytic;
pub mod numeric;

use std::io::{self, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::frame::{FrameError, FrameParams};
use crate::linalg::{self, Mat4, Vec4, C64};
use crate::model::{ModelError, PulseSpec, SpinSystem};

pub use analytic::{analytic_gate, analytic_trajectory, coeffs_analytic, propagate_rta_analytic, rotating_propagator};
pub use numeric::{propagate_numeric, propagate_unitary, propagate_unitary_sampled, Certificate, DrivenHamiltonian, HamiltonianKind, Picture, StepControl};

pub const NORM_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("step refinement did not converge: difference {difference:e} > {tolerance:e} at {steps_per_period} steps per period")]
    NoConvergence { difference: f64, tolerance: f64, steps_per_period: u32 },
    #[error("state norm {norm} differs from 1")]
    NotNormalized { norm: f64 },
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("closed form needs h1 = h4 and h2 = h3, got {couplings:?}")]
    AsymmetricCouplings { couplings: [f64; 4] },
    #[error("frame does not match the pulse (residual {residual:e})")]
    FrameMismatch { residual: f64 },
    #[error("trajectories are in different frames ({left:?} vs {right:?})")]
    FrameTagMismatch { left: FrameTag, right: FrameTag },
    #[error("invalid time span [{start}, {end}]")]
    InvalidSpan { start: f64, end: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Normalised four-level state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(Vec4);

impl StateVector {
    pub fn new(amps: [C64; 4]) -> Result<Self, EvolveError> {
        let v = Vec4::from(amps);
        let norm = v.norm();
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(EvolveError::NotNormalized { norm });
        }
        Ok(Self(v))
    }

    pub fn from_unnormalized(v: Vec4) -> Result<Self, EvolveError> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EvolveError::NotNormalized { norm });
        }
        Ok(Self(v / C64::from(norm)))
    }

    pub fn basis(k: usize) -> Self {
        Self(linalg::basis(k))
    }

    pub(crate) fn from_raw(v: Vec4) -> Self {
        Self(v)
    }

    pub fn amplitudes(&self) -> &Vec4 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = <[[f64; 2]; 4]>::deserialize(d)?;
        StateVector::new(pairs.map(|[re, im]| C64::new(re, im))).map_err(serde::de::Error::custom)
    }
}

/// Unitary 4×4 gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMatrix(Mat4);

impl GateMatrix {
    pub fn new(m: Mat4) -> Result<Self, EvolveError> {
        let defect = linalg::unitarity_defect(&m);
        if !(defect <= UNITARY_TOL) {
            return Err(EvolveError::NotUnitary { defect });
        }
        Ok(Self(m))
    }

    pub fn diagonal(phases: [f64; 4]) -> Self {
        Self(linalg::diag(phases.map(linalg::cis)))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    /// `arg G_kk`.
    pub fn diagonal_phases(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.0[(k, k)].arg())
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.0)
    }

    pub fn off_diagonal_mass(&self) -> f64 {
        linalg::off_diagonal_mass(&self.0)
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector(self.0 * psi.0)
    }
}

impl Serialize for GateMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..4).map(|r| (0..4).map(|c| [self.0[(r, c)].re, self.0[(r, c)].im]).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GateMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[[f64; 2]; 4]; 4]>::deserialize(d)?;
        let m = Mat4::from_fn(|r, c| C64::new(rows[r][c][0], rows[r][c][1]));
        GateMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// `|tr(A†B)| / 4`: 1 for gates equal up to a global phase.
pub fn fidelity(a: &GateMatrix, b: &GateMatrix) -> f64 {
    ((a.0.adjoint() * b.0).trace().norm() / 4.0).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    Lab,
    Rotating,
}

/// Sampled states; `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec4>,
    pub frame: FrameTag,
    pub certificate: Option<Certificate>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<StateVector> {
        self.states.last().map(|v| StateVector(*v))
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().fold(0.0_f64, |m, v| m.max((v.norm() - 1.0).abs()))
    }

    /// Lab states mapped into the rotating frame: `ψ = U(t) Ψ`.
    pub fn to_rotating(&self, frame: &FrameParams) -> Trajectory {
        if self.frame == FrameTag::Rotating {
            return self.clone();
        }
        let states = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, v)| {
                let u = frame.diagonal(t);
                Vec4::from_fn(|k, _| u[k] * v[k])
            })
            .collect();
        Trajectory { times: self.times.clone(), states, frame: FrameTag::Rotating, certificate: self.certificate }
    }

    /// Largest state distance `‖ψ_a − ψ_b‖` at the final sample.
    pub fn final_distance(&self, other: &Trajectory) -> Result<f64, EvolveError> {
        if self.frame != other.frame {
            return Err(EvolveError::FrameTagMismatch { left: self.frame, right: other.frame });
        }
        match (self.states.last(), other.states.last()) {
            (Some(a), Some(b)) => Ok((a - b).norm()),
            _ => Err(EvolveError::InvalidSpan { start: 0.0, end: 0.0 }),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3,re_c4,im_c4,norm")?;
        for (t, v) in self.times.iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for z in v.iter() {
                write!(w, ",{:.16e},{:.16e}", z.re, z.im)?;
            }
            writeln!(w, ",{:.16e}", v.norm())?;
        }
        Ok(())
    }
}

/// Which model produces the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Propagator {
    Analytic,
    RtaNumeric { control: StepControl },
    ExactNumeric { include_xy: bool, control: StepControl },
}

impl Propagator {
    pub fn label(&self) -> &'static str {
        match self {
            Propagator::Analytic => "analytic",
            Propagator::RtaNumeric { .. } => "rta_numeric",
            Propagator::ExactNumeric { include_xy: false, .. } => "exact_numeric",
            Propagator::ExactNumeric { include_xy: true, .. } => "exact_numeric_xy",
        }
    }

    /// Numeric model and step control; `None` for the closed form.
    pub fn driven(&self, sys: &SpinSystem, pulse: &PulseSpec) -> Option<(DrivenHamiltonian, StepControl)> {
        match *self {
            Propagator::Analytic => None,
            Propagator::RtaNumeric { control } => {
                Some((DrivenHamiltonian::new(sys, pulse, HamiltonianKind::Rta), control))
            }
            Propagator::ExactNumeric { include_xy, control } => {
                Some((DrivenHamiltonian::new(sys, pulse, HamiltonianKind::Exact { include_xy }), control))
            }
        }
    }

    /// Lab-frame trajectory over `[0, t_end]` for the logical input `ψ₀`.
    /// The closed form is sampled on `intervals` uniform steps; numeric runs
    /// keep every `sample_stride`-th step.
    pub fn trajectory(
        &self,
        sys: &SpinSystem,
        pulse: &PulseSpec,
        frame: &FrameParams,
        psi0: &StateVector,
        t_end: f64,
        intervals: usize,
    ) -> Result<Trajectory, EvolveError> {
        match self.driven(sys, pulse) {
            None => analytic_trajectory(sys, pulse, frame, psi0, t_end, intervals),
            Some((h, control)) => {
                let lab0 = StateVector(analytic::lab_initial(frame, psi0.amplitudes()));
                propagate_numeric(&h, (0.0, t_end), &lab0, &control)
            }
        }
    }

    /// Lab-frame state at `t` for the logical input `ψ₀`.
    pub fn evolve(
        &self,
        sys: &SpinSystem,
        pulse: &PulseSpec,
        frame: &FrameParams,
        psi0: &StateVector,
        t: f64,
    ) -> Result<StateVector, EvolveError> {
        match self.driven(sys, pulse) {
            None => propagate_rta_analytic(sys, pulse, frame, t, psi0),
            Some((h, mut control)) => {
                control.sample_stride = usize::MAX;
                let lab0 = StateVector(analytic::lab_initial(frame, psi0.amplitudes()));
                let traj = propagate_numeric(&h, (0.0, t), &lab0, &control)?;
                Ok(traj.last().expect("trajectory keeps its end point"))
            }
        }
    }
}

/// Gate `G = U_lab(τ, 0) · U†(0)` mapping logical inputs to lab outputs.
pub fn gate_tomography(
    propagator: &Propagator,
    sys: &SpinSystem,
    pulse: &PulseSpec,
    frame: &FrameParams,
) -> Result<(GateMatrix, Option<Certificate>), EvolveError> {
    match propagator.driven(sys, pulse) {
        None => Ok((GateMatrix::new(analytic_gate(sys, pulse, frame)?)?, None)),
        Some((h, control)) => {
            let (u, cert) = propagate_unitary(&h, (0.0, pulse.tau), &control)?;
            let u0 = frame.diagonal(0.0);
            let g = Mat4::from_fn(|r, c| u[(r, c)] * u0[c].conj());
            Ok((GateMatrix::new(g)?, Some(cert)))
        }
    }
}
