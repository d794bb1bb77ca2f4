//! Phase arithmetic modulo 2π.
//!
//! Frame phases such as `φ·τ` reach 10³ rad at NMR scale and far more in long
//! sweeps. Products are formed with an error-free transformation and reduced
//! against a two-word representation of 2π so the reduced value keeps
//! roughly full double precision.

use std::f64::consts::PI;

/// 2π rounded to the nearest double.
const TWO_PI_HI: f64 = 2.0 * PI;
/// 2π − `TWO_PI_HI`.
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Wraps an angle into (−π, π].
pub fn wrap(x: f64) -> f64 {
    reduce_parts(x, 0.0)
}

/// `rate · t` reduced into (−π, π].
pub fn phase_product(rate: f64, t: f64) -> f64 {
    let p = rate * t;
    let err = rate.mul_add(t, -p);
    reduce_parts(p, err)
}

/// Reduces `hi + lo` (with `|lo| ≪ |hi|`) into (−π, π].
fn reduce_parts(hi: f64, lo: f64) -> f64 {
    if !hi.is_finite() {
        return f64::NAN;
    }
    if lo == 0.0 && hi > -PI && hi <= PI {
        return hi;
    }
    if lo == 0.0 && hi == -PI {
        return PI;
    }
    let k = (hi / TWO_PI_HI).round();
    let r = (-k).mul_add(TWO_PI_HI, hi);
    let r = (-k).mul_add(TWO_PI_LO, r) + lo;
    // one correction step covers the rounding of `k`
    let mut r = r;
    if r > PI {
        r -= TWO_PI_HI;
    }
    if r <= -PI {
        r += TWO_PI_HI;
    }
    r.min(PI)
}

/// Signed distance between two angles, in (−π, π].
pub fn distance(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

/// Neumaier-compensated accumulator for phases that are wrapped on demand.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseSum {
    sum: f64,
    comp: f64,
}

impl PhaseSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) -> &mut Self {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self
    }

    pub fn sub(&mut self, x: f64) -> &mut Self {
        self.add(-x)
    }

    /// Unwrapped value.
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Value reduced into (−π, π].
    pub fn wrapped(&self) -> f64 {
        reduce_parts(self.sum, self.comp)
    }
}

/// Sum of already-reduced phases, wrapped.
pub fn wrapped_sum(terms: &[f64]) -> f64 {
    let mut acc = PhaseSum::new();
    for &t in terms {
        acc.add(t);
    }
    acc.wrapped()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(PI), PI);
        assert!((wrap(-PI) - PI).abs() < 1e-15);
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap(0.25) - 0.25).abs() == 0.0);
        assert!((wrap(-7.0) - (-7.0 + TWO_PI_HI)).abs() < 1e-15);
    }

    #[test]
    fn product_reduction_matches_exact_integer_multiples() {
        // 2π·k for integer k must reduce to ~0 even at 1e9 rad.
        for &k in &[1.0, 1.0e3, 1.0e6, 1.6e8] {
            let r = phase_product(TWO_PI_HI, k);
            assert!(r.abs() < 1e-6 * 1e-3 + k * 4e-16, "k={k} r={r}");
        }
    }

    #[test]
    fn product_reduction_against_high_precision_reference() {
        // references computed with 60-digit arithmetic on the exact doubles
        let r = phase_product(123_456_789.123, 7.77);
        assert!((r - (-2.635_279_268_565_366_8)).abs() < 1e-12, "{r}");
        let r = phase_product(500_000_200.0, 0.002_243_994_752_564_137_8);
        assert!((r - 3.141_592_653_459_319_6).abs() < 1e-12, "{r}");
    }

    #[test]
    fn compensated_sum() {
        let mut s = PhaseSum::new();
        s.add(1.0e16).add(1.0).sub(1.0e16);
        assert_eq!(s.value(), 1.0);
    }
}
