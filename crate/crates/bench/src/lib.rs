//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use spinforge_core::designer::{synthesize, GateTarget};
use spinforge_core::{DesignResult, SpinSystem};

/// Bench-top pair: ω₁ = 500, ω₂ = 125, J = 1, γ₂/γ₁ = 1/4.
pub fn desk() -> SpinSystem {
    SpinSystem::new(500.0, 125.0, 1.0, 1.0, 0.25).expect("valid system")
}

/// Same structure at a tenth of the Zeeman scale, for propagation benches.
pub fn small() -> SpinSystem {
    SpinSystem::new(50.0, 12.5, 1.0, 1.0, 0.25).expect("valid system")
}

/// `(m, n) = (1, 2)` design with fixed, non-trivial target phases.
pub fn design(sys: &SpinSystem, h1: f64) -> DesignResult {
    let target = GateTarget::with_h1([0.3, -1.1, 2.0, PI / 5.0], 1, 2, h1).expect("valid target");
    synthesize(sys, &target).expect("design succeeds")
}
