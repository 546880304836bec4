//! Bicanonical Kodaira map `q ↦ [h_1(q) : … : h_ν(q)]`, the subspaces
//! `Q_2[q]` of quadratic differentials vanishing at `q`, and the distance
//! from a class to the Kodaira curve.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::basis::{AlphaCoeffs, ClassCoeffs, DifferentialBasis};
use crate::error::{GclabError, Result};
use crate::geometry::group::{circumradius, CIRCUMRADIUS_COSH};
use crate::geometry::{conformal_factor, gauss_bonnet_area, hyperbolic_distance, MobiusMap, C64, GENUS};

const CANDIDATES: usize = 4;
const GOLDEN_STEPS: usize = 60;
const DESCENT_ROUNDS: usize = 12;

fn require_quadratic(basis: &DifferentialBasis) -> Result<()> {
    if basis.kappa != 2 {
        return Err(GclabError::KappaUnsupported {
            required: 2,
            found: basis.kappa,
        });
    }
    Ok(())
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(x_j) y_j`.
fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Fubini–Study distance between the rays through `x` and `y`, in `[0, π/2]`.
pub fn fubini_study(x: &[C64], y: &[C64]) -> f64 {
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return f64::NAN;
    }
    let p = inner(x, y);
    let perp: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - p / (nx * nx) * a).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (perp * nx).atan2(p.norm())
}

/// Unit representative of a nonzero ray with first nonzero entry real positive.
pub fn normalize_projective(x: &[C64]) -> Result<Vec<C64>> {
    let n = norm(x);
    if !(n > 0.0) || !n.is_finite() {
        return Err(GclabError::BasePoint);
    }
    let pivot = x
        .iter()
        .position(|v| v.norm() > 1e-14 * n)
        .ok_or(GclabError::BasePoint)?;
    let phase = x[pivot].conj() / x[pivot].norm();
    Ok(x.iter().map(|v| v * phase / n).collect())
}

/// The Kodaira point of `q` as a unit vector.
pub fn kodaira_point(basis: &DifferentialBasis, q: C64) -> Result<Vec<C64>> {
    require_quadratic(basis)?;
    normalize_projective(&basis.eval(q)?)
}

/// Orthonormal basis of `Q_2[q] = {a : Σ a_j h_j(q) = 0}`.
pub fn q2_basis(basis: &DifferentialBasis, q: C64) -> Result<Vec<AlphaCoeffs>> {
    require_quadratic(basis)?;
    let h = basis.eval(q)?;
    let n = norm(&h);
    if !(n > 0.0) {
        return Err(GclabError::BasePoint);
    }
    // Σ a_j h_j = ⟨conj h, a⟩, so the kernel is the complement of conj h.
    let v: Vec<C64> = h.iter().map(|x| x.conj() / n).collect();
    Ok(orthonormal_complement(&v)
        .into_iter()
        .map(AlphaCoeffs)
        .collect())
}

fn orthonormal_complement(v: &[C64]) -> Vec<Vec<C64>> {
    let nu = v.len();
    let mut found: Vec<Vec<C64>> = vec![v.to_vec()];
    let mut out = Vec::with_capacity(nu - 1);
    while out.len() < nu - 1 {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for j in 0..nu {
            let mut e = vec![C64::new(0.0, 0.0); nu];
            e[j] = C64::new(1.0, 0.0);
            // two Gram–Schmidt passes for orthogonality to rounding
            for _ in 0..2 {
                for f in &found {
                    let p = inner(f, &e);
                    for (x, y) in e.iter_mut().zip(f) {
                        *x -= p * y;
                    }
                }
            }
            let ne = norm(&e);
            if best.as_ref().is_none_or(|(b, _)| ne > *b) {
                best = Some((ne, e));
            }
        }
        let (ne, e) = best.expect("nonempty");
        let unit: Vec<C64> = e.into_iter().map(|x| x / ne).collect();
        found.push(unit.clone());
        out.push(unit);
    }
    out
}

/// The unit class whose pairing functional has kernel `Q_2[q]`.
pub fn class_from_point(basis: &DifferentialBasis, q: C64) -> Result<ClassCoeffs> {
    require_quadratic(basis)?;
    let h = basis.eval(q)?;
    let n = norm(&h);
    if !(n > 0.0) {
        return Err(GclabError::BasePoint);
    }
    // wedge_pair(c, a) = Σ conj(c_j) a_j on an orthonormal basis
    Ok(ClassCoeffs(h.iter().map(|x| x.conj() / n).collect()))
}

/// Norm of `a ↦ wedge_pair(ĉ, a)` restricted to `Q_2[q]`, for `ĉ = c/|c|`.
pub fn orthogonality_residual(basis: &DifferentialBasis, c: &ClassCoeffs, q: C64) -> Result<f64> {
    let nc = c.norm_sqr().sqrt();
    if nc == 0.0 {
        return Ok(0.0);
    }
    let q2 = q2_basis(basis, q)?;
    Ok(q2
        .iter()
        .map(|a| (basis.wedge_pair(c, a) / nc).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Van der Corput radical inverse in base `b`.
fn radical_inverse(mut n: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut x = 0.0;
    let mut f = inv;
    while n > 0 {
        x += (n % b) as f64 * f;
        n /= b;
        f *= inv;
    }
    x
}

/// `count` quasi-uniform points (for hyperbolic area) of the closed octagon.
pub fn domain_samples(basis: &DifferentialBasis, count: usize) -> Vec<C64> {
    let group = &basis.group;
    let span = CIRCUMRADIUS_COSH - 1.0;
    let mut out = Vec::with_capacity(count);
    let mut n = 1u64;
    while out.len() < count {
        let u = radical_inverse(n, 2);
        let v = radical_inverse(n, 3);
        n += 1;
        let rho = (1.0 + u * span).acosh();
        let z = C64::from_polar((0.5 * rho).tanh(), 2.0 * PI * v);
        if group.in_domain(z, 1e-12) {
            out.push(z);
        }
    }
    out
}

/// Result of a Kodaira-curve search.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct KodairaHit {
    /// Fubini–Study distance from the class functional to the curve.
    pub distance: f64,
    /// A point of the octagon attaining it.
    pub argmin: C64,
}

/// Sampled Kodaira curve, reusable across classes.
pub struct KodairaSampler<'a> {
    basis: &'a DifferentialBasis,
    pub points: Vec<C64>,
    curve: Vec<Vec<C64>>,
    /// Hyperbolic spacing `sqrt(area / count)` of the sample.
    pub spacing: f64,
    /// Largest Fubini–Study speed of the curve per unit hyperbolic length.
    pub max_speed: f64,
}

impl<'a> KodairaSampler<'a> {
    pub fn new(basis: &'a DifferentialBasis, sample_count: usize) -> Result<Self> {
        require_quadratic(basis)?;
        if sample_count == 0 {
            return Err(GclabError::InvalidArgument("sample_count = 0".into()));
        }
        let points = domain_samples(basis, sample_count);
        let rows: Vec<(Vec<C64>, f64)> = points
            .par_iter()
            .map(|&z| {
                let h = basis.eval_unreduced(z);
                let eps = 1e-6 * (1.0 - z.norm_sqr());
                let hp = basis.eval_unreduced(z + eps);
                let hm = basis.eval_unreduced(z - eps);
                let dh: Vec<C64> = hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
                let nh = norm(&h);
                let p = inner(&h, &dh) / (nh * nh);
                let perp: f64 = dh
                    .iter()
                    .zip(&h)
                    .map(|(d, x)| (d - p * x).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                (h, perp / nh / conformal_factor(z).sqrt())
            })
            .collect();
        let max_speed = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let curve = rows
            .into_iter()
            .map(|(h, _)| normalize_projective(&h))
            .collect::<Result<Vec<_>>>()?;
        let spacing = (gauss_bonnet_area(GENUS) / sample_count as f64).sqrt();
        Ok(Self {
            basis,
            points,
            curve,
            spacing,
            max_speed,
        })
    }

    /// Fubini–Study covering radius of the sampled curve.
    pub fn resolution(&self) -> f64 {
        0.5 * self.spacing * self.max_speed
    }

    /// Sampled curve points, unit-normalized.
    pub fn curve(&self) -> &[Vec<C64>] {
        &self.curve
    }

    /// Minimum distance between the class functional and the curve.
    pub fn distance(&self, c: &ClassCoeffs) -> Result<KodairaHit> {
        if c.is_zero() {
            return Err(GclabError::Degenerate("zero class has no projective point"));
        }
        let f = self.basis.functional(c);
        let fhat = normalize_projective(&f)?;
        let coarse: Vec<f64> = self.curve.iter().map(|k| objective(&fhat, k)).collect();
        let mut order: Vec<usize> = (0..coarse.len()).collect();
        order.sort_by(|&i, &j| coarse[i].total_cmp(&coarse[j]));

        let mut starts: Vec<C64> = Vec::new();
        for &i in &order {
            if starts.len() == CANDIDATES {
                break;
            }
            let z = self.points[i];
            if starts
                .iter()
                .all(|&s| hyperbolic_distance(s, z) > 2.0 * self.spacing)
            {
                starts.push(z);
            }
        }

        let mut best = (coarse[order[0]], self.points[order[0]]);
        for s in starts {
            let (v, z) = self.refine(&fhat, s);
            if v < best.0 {
                best = (v, z);
            }
        }
        let argmin = self.basis.group.reduce_to_domain(best.1)?.0;
        let h = self.basis.eval(argmin)?;
        Ok(KodairaHit {
            distance: fubini_study(&fhat, &h),
            argmin,
        })
    }

    /// Golden-section coordinate descent in a local chart centred at `start`.
    fn refine(&self, fhat: &[C64], start: C64) -> (f64, C64) {
        let chart = MobiusMap::moving_to_origin(start).inverse();
        let eval = |w: C64| -> f64 {
            if w.norm_sqr() >= 0.25 {
                return f64::INFINITY;
            }
            let z = chart.apply_unchecked(w);
            objective(fhat, &self.basis.eval_unreduced(z))
        };
        let mut w = C64::new(0.0, 0.0);
        let mut value = eval(w);
        let mut half = self.spacing.min(0.4);
        for _ in 0..DESCENT_ROUNDS {
            let before = value;
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let (s, v) = golden(|s| eval(w + dir * s), -half, half);
                if v < value {
                    w += dir * s;
                    value = v;
                }
            }
            half *= 0.25;
            if before - value <= 1e-16 * before.max(1e-300) && half < 1e-9 {
                break;
            }
        }
        (value, chart.apply_unchecked(w))
    }
}

/// `1 − |⟨f̂, ĥ⟩|² = sin²` of the Fubini–Study distance.
fn objective(fhat: &[C64], h: &[C64]) -> f64 {
    let nh = norm(h);
    1.0 - (inner(fhat, h).norm() / nh).powi(2)
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimum Fubini–Study distance between the class and the Kodaira curve,
/// with the octagon point attaining it.
pub fn kodaira_distance(
    basis: &DifferentialBasis,
    c: &ClassCoeffs,
    sample_count: usize,
) -> Result<(f64, C64)> {
    let hit = KodairaSampler::new(basis, sample_count)?.distance(c)?;
    Ok((hit.distance, hit.argmin))
}

/// Hyperelliptic involution of the Bolza surface in the chart.
pub fn hyperelliptic_involution(z: C64) -> C64 {
    -z
}

/// Hyperbolic distance from `z` to the orbit of `q` and of its hyperelliptic
/// partner `−q`, which share a Kodaira point.
pub fn kodaira_fiber_distance(basis: &DifferentialBasis, z: C64, q: C64) -> f64 {
    let images = basis.group.elements_within(2.0 * circumradius() + 0.5);
    let d1 = crate::geometry::FuchsianGroup::orbit_distance(&images, z, q);
    let d2 = crate::geometry::FuchsianGroup::orbit_distance(&images, z, hyperelliptic_involution(q));
    d1.min(d2)
}
