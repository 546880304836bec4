//! Disk automorphisms `z ↦ (a z + b) / (b̄ z + ā)` with `|a|² − |b|² = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GclabError, Result};

pub type C64 = Complex64;

/// Conformal factor of the Poincaré disk metric, `4 / (1 − |z|²)²`.
#[inline]
pub fn conformal_factor(z: C64) -> f64 {
    let s = 1.0 - z.norm_sqr();
    4.0 / (s * s)
}

/// Hyperbolic distance between two points of the open disk.
pub fn hyperbolic_distance(z: C64, w: C64) -> f64 {
    let num = 2.0 * (z - w).norm_sqr();
    let den = (1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr());
    (1.0 + num / den).acosh()
}

/// Hyperbolic distance from the origin.
#[inline]
pub fn distance_from_origin(z: C64) -> f64 {
    2.0 * z.norm().atanh()
}

/// Geodesic midpoint of two disk points.
pub fn geodesic_midpoint(z1: C64, z2: C64) -> C64 {
    // move z1 to the origin, halve along the ray, move back
    let to_origin = MobiusMap::moving_to_origin(z1);
    let w = to_origin.apply_unchecked(z2);
    let r = w.norm();
    if r == 0.0 {
        return z1;
    }
    let half = (r.atanh() * 0.5).tanh();
    to_origin.inverse().apply_unchecked(w * (half / r))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: C64,
    pub b: C64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap {
        a: C64::new(1.0, 0.0),
        b: C64::new(0.0, 0.0),
    };

    pub fn new(a: C64, b: C64) -> Self {
        Self { a, b }
    }

    /// Euclidean rotation by `theta`.
    pub fn rotation(theta: f64) -> Self {
        Self::new(C64::from_polar(1.0, 0.5 * theta), C64::new(0.0, 0.0))
    }

    /// Hyperbolic translation of length `len` along the real diameter.
    pub fn real_translation(len: f64) -> Self {
        Self::new(
            C64::new((0.5 * len).cosh(), 0.0),
            C64::new((0.5 * len).sinh(), 0.0),
        )
    }

    /// The map `z ↦ (z − p) / (1 − p̄ z)` sending `p` to 0, in normalized form.
    pub fn moving_to_origin(p: C64) -> Self {
        let s = (1.0 - p.norm_sqr()).sqrt();
        Self::new(C64::new(1.0 / s, 0.0), -p / s)
    }

    pub fn det(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn apply(&self, z: C64) -> Result<C64> {
        if z.norm_sqr() >= 1.0 {
            return Err(GclabError::OutsideDisk { re: z.re, im: z.im });
        }
        Ok(self.apply_unchecked(z))
    }

    #[inline]
    pub fn apply_unchecked(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    pub fn derivative(&self, z: C64) -> Result<C64> {
        if z.norm_sqr() >= 1.0 {
            return Err(GclabError::OutsideDisk { re: z.re, im: z.im });
        }
        Ok(self.derivative_unchecked(z))
    }

    #[inline]
    pub fn derivative_unchecked(&self, z: C64) -> C64 {
        let d = self.b.conj() * z + self.a.conj();
        (d * d).inv()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    /// Rescales to unit determinant and fixes the sign ambiguity of `(a, b)`.
    pub fn normalized(&self) -> MobiusMap {
        let s = self.det().sqrt();
        let mut m = MobiusMap {
            a: self.a / s,
            b: self.b / s,
        };
        if m.a.re < 0.0 || (m.a.re == 0.0 && m.a.im < 0.0) {
            m.a = -m.a;
            m.b = -m.b;
        }
        m
    }

    /// Hyperbolic displacement of the origin, `d(0, γ·0)`.
    pub fn displacement(&self) -> f64 {
        (1.0 + 2.0 * self.b.norm_sqr()).acosh()
    }

    /// Max-entry distance between sign-normalized matrices.
    pub fn distance(&self, other: &MobiusMap) -> f64 {
        let p = self.normalized();
        let q = other.normalized();
        (p.a - q.a).norm().max((p.b - q.b).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_fixes_points() {
        let z = C64::new(0.3, 0.1);
        assert_eq!(MobiusMap::IDENTITY.apply(z).unwrap(), z);
        assert_eq!(MobiusMap::IDENTITY.derivative(z).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_points_outside_disk() {
        assert!(MobiusMap::IDENTITY.apply(C64::new(1.0, 0.0)).is_err());
        assert!(MobiusMap::IDENTITY.derivative(C64::new(0.8, 0.7)).is_err());
    }

    #[test]
    fn rotation_rotates() {
        let z = C64::new(0.5, 0.0);
        let w = MobiusMap::rotation(PI / 2.0).apply(z).unwrap();
        assert!((w - C64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn midpoint_is_equidistant() {
        let z1 = C64::new(0.2, -0.4);
        let z2 = C64::new(-0.6, 0.3);
        let m = geodesic_midpoint(z1, z2);
        let d = hyperbolic_distance(z1, z2);
        assert!((hyperbolic_distance(z1, m) - 0.5 * d).abs() < 1e-12);
        assert!((hyperbolic_distance(m, z2) - 0.5 * d).abs() < 1e-12);
    }

    #[test]
    fn displacement_matches_distance() {
        let m = MobiusMap::real_translation(1.7).compose(&MobiusMap::rotation(0.4));
        let d = distance_from_origin(m.apply_unchecked(C64::new(0.0, 0.0)));
        assert!((m.displacement() - d).abs() < 1e-12);
        assert!((m.displacement() - 1.7).abs() < 1e-12);
    }
}
