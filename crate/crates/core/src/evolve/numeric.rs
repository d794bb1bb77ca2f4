//! Fixed-step RK4 for the driven four-level Schrödinger equation.
//!
//! The step is a fraction of the fastest period present (static gaps and
//! carriers). Results carry a certificate from a step-halving comparison.
//!
//! By default the state is integrated in the interaction picture of the
//! static Hamiltonian `H₀ = V E Vᵀ`: `ψ_I = e^{iEt} Vᵀ ψ`. This removes the
//! large free precession exactly, leaving only drive-sized dynamics for RK4.
//! `Picture::Lab` integrates the lab-frame equation directly.

use nalgebra::{SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::angle::phase_product;
use crate::linalg::{cis, Mat4, RealMat4, C64};
use crate::model::{static_hamiltonian, DriveWeights, PulseSpec, SpinSystem};

use super::{EvolveError, FrameTag, StateVector, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picture {
    Lab,
    Interaction,
}

/// Step selection and acceptance.
///
/// The integrator runs at `steps_per_period` and at twice that, doubling
/// until the two final states differ by at most `tolerance` (2-norm, or the
/// largest column norm for propagators) and the norm has drifted by at most
/// 1e-9. The finer run is returned. `certify = false` performs a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub steps_per_period: u32,
    pub tolerance: f64,
    pub max_steps_per_period: u32,
    pub picture: Picture,
    pub sample_stride: usize,
    pub certify: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            steps_per_period: 64,
            tolerance: 1e-8,
            max_steps_per_period: 8192,
            picture: Picture::Interaction,
            sample_stride: 1,
            certify: true,
        }
    }
}

impl StepControl {
    pub fn fixed(steps_per_period: u32, picture: Picture) -> Self {
        Self { steps_per_period, picture, certify: false, ..Self::default() }
    }
}

pub const NORM_DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub steps_per_period: u32,
    pub steps: usize,
    /// Difference to the run at half the step count; `None` when uncertified.
    pub difference: Option<f64>,
    pub tolerance: f64,
    pub norm_drift: f64,
    pub refinements: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Rta,
    Exact { include_xy: bool },
}

/// Lab Hamiltonian `H₀ + P(t)` with `P` switched on inside the pulse window.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian {
    pulse: PulseSpec,
    weights: DriveWeights,
    static_h: Mat4,
    energies: [f64; 4],
    /// Eigenvectors of `H₀` as columns; `None` when `H₀` is diagonal.
    basis: Option<Mat4>,
    fastest: f64,
}

impl DrivenHamiltonian {
    pub fn new(sys: &SpinSystem, pulse: &PulseSpec, kind: HamiltonianKind) -> Self {
        let (weights, include_xy) = match kind {
            HamiltonianKind::Rta => (DriveWeights::rta(sys, pulse), false),
            HamiltonianKind::Exact { include_xy } => (DriveWeights::exact(sys, pulse), include_xy),
        };
        let static_h = static_hamiltonian(sys, include_xy);
        let (energies, basis) = if include_xy && sys.j() != 0.0 {
            let real: RealMat4 = static_h.map(|z| z.re);
            let eig = SymmetricEigen::new(real);
            let e = std::array::from_fn(|k| eig.eigenvalues[k]);
            (e, Some(eig.eigenvectors.map(|x| C64::new(x, 0.0))))
        } else {
            (std::array::from_fn(|k| static_h[(k, k)].re), None)
        };
        let mut fastest = 0.0_f64;
        for a in 0..4 {
            for b in 0..4 {
                fastest = fastest.max((energies[a] - energies[b]).abs());
            }
        }
        for w in pulse.frequencies() {
            fastest = fastest.max(w.abs());
        }
        Self { pulse: *pulse, weights, static_h, energies, basis, fastest }
    }

    pub fn pulse(&self) -> &PulseSpec {
        &self.pulse
    }

    /// Largest angular frequency in the problem; sets the step size.
    pub fn fastest_frequency(&self) -> f64 {
        self.fastest
    }

    /// Lab-frame `H(t)`.
    pub fn at(&self, t: f64) -> Mat4 {
        self.lab(t, self.pulse.is_on(t))
    }

    fn drive(&self, t: f64) -> Mat4 {
        let mut p = Mat4::zeros();
        self.weights.fill(&self.pulse.carriers(t), &mut p);
        p
    }

    fn lab(&self, t: f64, on: bool) -> Mat4 {
        if on {
            self.static_h + self.drive(t)
        } else {
            self.static_h
        }
    }

    fn interaction(&self, t: f64, on: bool) -> Mat4 {
        if !on {
            return Mat4::zeros();
        }
        let mut p = self.drive(t);
        if let Some(v) = &self.basis {
            p = v.adjoint() * p * v;
        }
        let g: [C64; 4] = std::array::from_fn(|k| cis(phase_product(self.energies[k], t)));
        Mat4::from_fn(|r, c| g[r] * p[(r, c)] * g[c].conj())
    }

    fn to_interaction<const N: usize>(&self, t: f64, x: &SMatrix<C64, 4, N>) -> SMatrix<C64, 4, N> {
        let y = match &self.basis {
            Some(v) => v.adjoint() * x,
            None => *x,
        };
        let g: [C64; 4] = std::array::from_fn(|k| cis(phase_product(self.energies[k], t)));
        SMatrix::<C64, 4, N>::from_fn(|r, c| g[r] * y[(r, c)])
    }

    fn from_interaction<const N: usize>(&self, t: f64, x: &SMatrix<C64, 4, N>) -> SMatrix<C64, 4, N> {
        let g: [C64; 4] = std::array::from_fn(|k| cis(-phase_product(self.energies[k], t)));
        let y = SMatrix::<C64, 4, N>::from_fn(|r, c| g[r] * x[(r, c)]);
        match &self.basis {
            Some(v) => v * y,
            None => y,
        }
    }

    fn eval(&self, picture: Picture, t: f64, on: bool) -> Mat4 {
        match picture {
            Picture::Lab => self.lab(t, on),
            Picture::Interaction => self.interaction(t, on),
        }
    }

    /// Step count for an interval of length `len`: a multiple of 4, at least 4.
    fn steps_for(&self, len: f64, steps_per_period: u32) -> usize {
        let periods = len * self.fastest / (2.0 * std::f64::consts::PI);
        let n = (periods * steps_per_period as f64).ceil().max(1.0) as usize;
        n.div_ceil(4) * 4
    }

    /// Sub-intervals of `span` split at the pulse edges, with the drive state
    /// on each.
    fn pieces(&self, (t0, t1): (f64, f64)) -> Vec<(f64, f64, bool)> {
        let mut cuts = vec![t0];
        for edge in [0.0, self.pulse.tau] {
            if edge > t0 && edge < t1 {
                cuts.push(edge);
            }
        }
        cuts.push(t1);
        cuts.windows(2)
            .map(|w| (w[0], w[1], self.pulse.tau > 0.0 && w[0] >= 0.0 && w[1] <= self.pulse.tau))
            .collect()
    }

    /// Single fixed-step run; `record` receives lab states every `stride`
    /// steps and at the end.
    pub(crate) fn run<const N: usize>(
        &self,
        span: (f64, f64),
        x0: &SMatrix<C64, 4, N>,
        steps_per_period: u32,
        picture: Picture,
        stride: usize,
        mut record: impl FnMut(f64, &SMatrix<C64, 4, N>),
    ) -> (SMatrix<C64, 4, N>, usize) {
        let to_lab = |t: f64, x: &SMatrix<C64, 4, N>| match picture {
            Picture::Lab => *x,
            Picture::Interaction => self.from_interaction(t, x),
        };
        let mut x = match picture {
            Picture::Lab => *x0,
            Picture::Interaction => self.to_interaction(span.0, x0),
        };
        let stride = stride.max(1);
        let mut count = 0usize;
        record(span.0, x0);
        let pieces = self.pieces(span);
        for (pi, &(a, b, on)) in pieces.iter().enumerate() {
            let n = self.steps_for(b - a, steps_per_period);
            let dt = (b - a) / n as f64;
            let mut h_start = self.eval(picture, a, on);
            for k in 0..n {
                let t = a + k as f64 * dt;
                let t_end = if k + 1 == n { b } else { a + (k + 1) as f64 * dt };
                let h_mid = self.eval(picture, t + 0.5 * dt, on);
                let h_end = self.eval(picture, t_end, on);
                x = rk4_step(&h_start, &h_mid, &h_end, &x, dt);
                h_start = h_end;
                count += 1;
                let last = pi + 1 == pieces.len() && k + 1 == n;
                if last || count % stride == 0 {
                    record(t_end, &to_lab(t_end, &x));
                }
            }
        }
        (to_lab(span.1, &x), count)
    }
}

fn deriv<const N: usize>(h: &Mat4, x: &SMatrix<C64, 4, N>) -> SMatrix<C64, 4, N> {
    (h * x).map(|z| C64::new(z.im, -z.re))
}

fn rk4_step<const N: usize>(
    h0: &Mat4,
    hm: &Mat4,
    h1: &Mat4,
    x: &SMatrix<C64, 4, N>,
    dt: f64,
) -> SMatrix<C64, 4, N> {
    let half = C64::from(0.5 * dt);
    let k1 = deriv(h0, x);
    let k2 = deriv(hm, &(x + k1 * half));
    let k3 = deriv(hm, &(x + k2 * half));
    let k4 = deriv(h1, &(x + k3 * C64::from(dt)));
    x + (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0)
}

/// Largest column 2-norm of `a − b`.
fn column_distance<const N: usize>(a: &SMatrix<C64, 4, N>, b: &SMatrix<C64, 4, N>) -> f64 {
    (a - b).column_iter().fold(0.0_f64, |m, c| m.max(c.norm()))
}

/// `max |X†X − X₀†X₀|`.
fn gram_drift<const N: usize>(x: &SMatrix<C64, 4, N>, x0: &SMatrix<C64, 4, N>) -> f64 {
    let d = x.adjoint() * x - x0.adjoint() * x0;
    d.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

fn check_span(span: (f64, f64)) -> Result<(), EvolveError> {
    if !(span.0.is_finite() && span.1.is_finite() && span.1 >= span.0) {
        return Err(EvolveError::InvalidSpan { start: span.0, end: span.1 });
    }
    Ok(())
}

/// Certificate for an empty span, where no step is taken.
fn trivial(control: &StepControl) -> Certificate {
    Certificate {
        steps_per_period: control.steps_per_period,
        steps: 0,
        difference: control.certify.then_some(0.0),
        tolerance: control.tolerance,
        norm_drift: 0.0,
        refinements: 0,
    }
}

/// Runs with step doubling until accepted. The closure performs one run at a
/// given steps-per-period and returns the final value and step count.
fn certified<const N: usize, T>(
    control: &StepControl,
    x0: &SMatrix<C64, 4, N>,
    mut run: impl FnMut(u32) -> (SMatrix<C64, 4, N>, usize, T),
) -> Result<(SMatrix<C64, 4, N>, T, Certificate), EvolveError> {
    let spp = control.steps_per_period.max(1);
    let (mut coarse, steps, extra) = run(spp);
    if !control.certify {
        let cert = Certificate {
            steps_per_period: spp,
            steps,
            difference: None,
            tolerance: control.tolerance,
            norm_drift: gram_drift(&coarse, x0),
            refinements: 0,
        };
        return Ok((coarse, extra, cert));
    }
    let mut spp = spp;
    let mut refinements = 0;
    let mut difference = f64::INFINITY;
    while spp.saturating_mul(2) <= control.max_steps_per_period {
        spp *= 2;
        let (fine, steps, extra) = run(spp);
        difference = column_distance(&fine, &coarse);
        let norm_drift = gram_drift(&fine, x0);
        if difference <= control.tolerance && norm_drift <= NORM_DRIFT_TOL {
            let cert = Certificate {
                steps_per_period: spp,
                steps,
                difference: Some(difference),
                tolerance: control.tolerance,
                norm_drift,
                refinements,
            };
            return Ok((fine, extra, cert));
        }
        coarse = fine;
        refinements += 1;
    }
    Err(EvolveError::NoConvergence { difference, tolerance: control.tolerance, steps_per_period: spp })
}

/// Lab-frame trajectory from a lab-frame initial state.
pub fn propagate_numeric(
    h: &DrivenHamiltonian,
    span: (f64, f64),
    psi0: &StateVector,
    control: &StepControl,
) -> Result<Trajectory, EvolveError> {
    check_span(span)?;
    let x0 = *psi0.amplitudes();
    if span.1 == span.0 {
        return Ok(Trajectory { times: vec![span.0], states: vec![x0], frame: FrameTag::Lab, certificate: Some(trivial(control)) });
    }
    let (_, (times, states), cert) = certified(control, &x0, |spp| {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let (x, n) = h.run(span, &x0, spp, control.picture, control.sample_stride, |t, v| {
            times.push(t);
            states.push(*v);
        });
        (x, n, (times, states))
    })?;
    Ok(Trajectory { times, states, frame: FrameTag::Lab, certificate: Some(cert) })
}

/// Lab-frame propagator `U(t₁, t₀)`.
pub fn propagate_unitary(
    h: &DrivenHamiltonian,
    span: (f64, f64),
    control: &StepControl,
) -> Result<(Mat4, Certificate), EvolveError> {
    check_span(span)?;
    let id = Mat4::identity();
    if span.1 == span.0 {
        return Ok((id, trivial(control)));
    }
    let (u, _, cert) = certified(control, &id, |spp| {
        let (u, n) = h.run(span, &id, spp, control.picture, usize::MAX, |_, _| {});
        (u, n, ())
    })?;
    Ok((u, cert))
}

/// Propagator run that also returns `sample(t, U(t))` every
/// `control.sample_stride` steps (and at both ends) of the accepted run.
pub fn propagate_unitary_sampled<T>(
    h: &DrivenHamiltonian,
    span: (f64, f64),
    control: &StepControl,
    sample: impl Fn(f64, &Mat4) -> T,
) -> Result<(Mat4, Vec<f64>, Vec<T>, Certificate), EvolveError> {
    check_span(span)?;
    let id = Mat4::identity();
    if span.1 == span.0 {
        let first = sample(span.0, &id);
        return Ok((id, vec![span.0], vec![first], trivial(control)));
    }
    let base = control.steps_per_period.max(1);
    let (u, (times, values), cert) = certified(control, &id, |spp| {
        let mut times = Vec::new();
        let mut values = Vec::new();
        // the first run of a certified pair is never the one returned
        let keep = !control.certify || spp > base;
        let stride = if keep { control.sample_stride } else { usize::MAX };
        let (u, n) = h.run(span, &id, spp, control.picture, stride, |t, m| {
            if keep {
                times.push(t);
                values.push(sample(t, m));
            }
        });
        (u, n, (times, values))
    })?;
    Ok((u, times, values, cert))
}
