//! Fixed-size complex linear algebra for the four-level system.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;
pub type Vec4 = Vector4<C64>;
pub type RealMat4 = Matrix4<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `e^{iθ}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    let (s, c) = theta.sin_cos();
    C64::new(c, s)
}

/// Computational basis vector `|m_k⟩` (0-based `k`).
pub fn basis(k: usize) -> Vec4 {
    let mut v = Vec4::zeros();
    v[k] = ONE;
    v
}

pub fn diag(d: [C64; 4]) -> Mat4 {
    Mat4::from_diagonal(&Vec4::from(d))
}

pub fn to_complex(m: &RealMat4) -> Mat4 {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat4) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |H − H†|`.
pub fn hermiticity_defect(h: &Mat4) -> f64 {
    max_abs(&(h - h.adjoint()))
}

/// `max |G†G − I|`.
pub fn unitarity_defect(g: &Mat4) -> f64 {
    max_abs(&(g.adjoint() * g - Mat4::identity()))
}

/// Frobenius norm of the off-diagonal part.
pub fn off_diagonal_mass(g: &Mat4) -> f64 {
    let mut s = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            if r != c {
                s += g[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Kronecker product of two 2×2 matrices, first factor acting on spin 1.
pub fn kron2(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}
