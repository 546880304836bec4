//! Zeros of `α = Σ a_j h_j` by the argument principle on the mesh triangles.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::basis::{dot, AlphaCoeffs, DifferentialBasis};
use crate::error::{GclabError, Result};
use crate::geometry::group::circumradius;
use crate::geometry::{FuchsianGroup, SurfaceMesh, C64};

/// Largest argument increment accepted on a contour segment.
const MAX_ARG_STEP: f64 = PI / 4.0;
const MAX_BISECTIONS: u32 = 40;
/// Relative distance to a zero below which a contour is rejected.
const CONTOUR_CLEARANCE: f64 = 1e-8;
const MAX_SUBDIVISION: u32 = 6;
const RERANDOMIZATIONS: u32 = 2;
const MERGE_RADIUS: f64 = 1e-6;
pub const DEFAULT_ZERO_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Zero {
    /// Location in the closed fundamental octagon.
    pub z: C64,
    pub multiplicity: u32,
}

/// Sum of multiplicities.
pub fn total_multiplicity(zeros: &[Zero]) -> u32 {
    zeros.iter().map(|z| z.multiplicity).sum()
}

/// Zeros of `Σ a_j h_j` on the surface, each identified zero listed once.
pub fn locate_zeros(basis: &DifferentialBasis, mesh: &SurfaceMesh, a: &AlphaCoeffs) -> Result<Vec<Zero>> {
    locate_zeros_seeded(basis, mesh, a, DEFAULT_ZERO_SEED)
}

/// As [`locate_zeros`], with the contour re-randomization seed made explicit.
pub fn locate_zeros_seeded(
    basis: &DifferentialBasis,
    mesh: &SurfaceMesh,
    a: &AlphaCoeffs,
    seed: u64,
) -> Result<Vec<Zero>> {
    if a.0.len() != basis.nu {
        return Err(GclabError::ShapeMismatch {
            expected: basis.nu,
            got: a.0.len(),
        });
    }
    if a.norm_sqr() == 0.0 {
        return Err(GclabError::Degenerate("zero differential has no divisor"));
    }
    let f = |z: C64| dot(&basis.eval_unreduced(z), &a.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = mesh.vertices.clone();
    let interior = interior_flags(mesh);
    let mut attempt = 0;
    loop {
        match scan(&f, &vertices, &mesh.triangles) {
            Ok(raw) => return Ok(merge(&basis.group, raw)),
            Err(Scan::NearContour) if attempt < RERANDOMIZATIONS => {
                attempt += 1;
                jitter(&mut vertices, mesh, &interior, &mut rng);
            }
            Err(Scan::NearContour) => {
                return Err(GclabError::Inconclusive(format!(
                    "zero within {CONTOUR_CLEARANCE:e} of a contour after {RERANDOMIZATIONS} re-randomizations"
                )))
            }
            Err(Scan::Negative) => {
                return Err(GclabError::Inconclusive(
                    "negative winding number on a mesh cell".into(),
                ))
            }
        }
    }
}

enum Scan {
    NearContour,
    Negative,
}

fn interior_flags(mesh: &SurfaceMesh) -> Vec<bool> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in &mesh.triangles {
        for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *count.entry((p.min(q), p.max(q))).or_default() += 1;
        }
    }
    let mut interior = vec![true; mesh.vertices.len()];
    for ((p, q), n) in count {
        if n == 1 {
            interior[p] = false;
            interior[q] = false;
        }
    }
    interior
}

/// Moves interior vertices by a few percent of their shortest edge.
fn jitter(vertices: &mut [C64], mesh: &SurfaceMesh, interior: &[bool], rng: &mut ChaCha8Rng) {
    let mut shortest = vec![f64::INFINITY; vertices.len()];
    for t in &mesh.triangles {
        for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let l = (vertices[p] - vertices[q]).norm();
            shortest[p] = shortest[p].min(l);
            shortest[q] = shortest[q].min(l);
        }
    }
    for (i, v) in vertices.iter_mut().enumerate() {
        let dx: f64 = rng.random_range(-1.0..1.0);
        let dy: f64 = rng.random_range(-1.0..1.0);
        if interior[i] {
            *v += C64::new(dx, dy) * (0.05 * shortest[i]);
        }
    }
}

/// Raw zeros found in the chart triangles, before identification.
fn scan(f: &impl Fn(C64) -> C64, vertices: &[C64], triangles: &[[usize; 3]]) -> Result<Vec<Zero>, Scan> {
    let values: Vec<C64> = vertices.iter().map(|&z| f(z)).collect();
    let mut edges: HashMap<(usize, usize), f64> = HashMap::new();
    let mut found = Vec::new();
    for t in triangles {
        let mut total = 0.0;
        for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = (p.min(q), p.max(q));
            let d = match edges.get(&key) {
                Some(&d) => d,
                None => {
                    let (a, b) = key;
                    let d = edge_arg(f, vertices[a], vertices[b], values[a], values[b])?;
                    edges.insert(key, d);
                    d
                }
            };
            total += if p < q { d } else { -d };
        }
        let w = winding(total);
        if w < 0 {
            return Err(Scan::Negative);
        }
        if w > 0 {
            let corners = t.map(|i| vertices[i]);
            resolve(f, corners, w as u32, 0, &mut found)?;
        }
    }
    Ok(found)
}

fn winding(total: f64) -> i64 {
    (total / (2.0 * PI)).round() as i64
}

/// Argument increment of `f` along the chord from `p` to `q`.
fn edge_arg(f: &impl Fn(C64) -> C64, p: C64, q: C64, fp: C64, fq: C64) -> Result<f64, Scan> {
    if fp == C64::new(0.0, 0.0) || fq == C64::new(0.0, 0.0) {
        return Err(Scan::NearContour);
    }
    // a fixed initial split guards against full turns between endpoints
    let mut total = 0.0;
    let mut prev = (p, fp);
    for k in 1..=4 {
        let z = p + (q - p) * (k as f64 / 4.0);
        let fz = if k == 4 { fq } else { f(z) };
        total += segment_arg(f, prev.0, z, prev.1, fz, 0)?;
        prev = (z, fz);
    }
    Ok(total)
}

fn segment_arg(f: &impl Fn(C64) -> C64, p: C64, q: C64, fp: C64, fq: C64, depth: u32) -> Result<f64, Scan> {
    let d = (fq / fp).arg();
    if d.abs() <= MAX_ARG_STEP {
        return Ok(d);
    }
    if depth >= MAX_BISECTIONS {
        return Err(Scan::NearContour);
    }
    let m = 0.5 * (p + q);
    let fm = f(m);
    // first-order distance from m to the nearest zero, relative to the chart scale
    let slope = (fq - fp).norm() / (q - p).norm();
    if fm == C64::new(0.0, 0.0) || fm.norm() < CONTOUR_CLEARANCE * slope * (1.0 - m.norm_sqr()) {
        return Err(Scan::NearContour);
    }
    Ok(segment_arg(f, p, m, fp, fm, depth + 1)? + segment_arg(f, m, q, fm, fq, depth + 1)?)
}

fn triangle_winding(f: &impl Fn(C64) -> C64, c: [C64; 3]) -> Result<i64, Scan> {
    let v = c.map(f);
    let mut total = 0.0;
    for k in 0..3 {
        total += edge_arg(f, c[k], c[(k + 1) % 3], v[k], v[(k + 1) % 3])?;
    }
    Ok(winding(total))
}

/// Splits a cell until each piece holds a single zero, then polishes it.
fn resolve(
    f: &impl Fn(C64) -> C64,
    c: [C64; 3],
    w: u32,
    depth: u32,
    out: &mut Vec<Zero>,
) -> Result<(), Scan> {
    if w == 1 || depth >= MAX_SUBDIVISION {
        out.push(Zero {
            z: newton(f, c, w),
            multiplicity: w,
        });
        return Ok(());
    }
    let m = [0.5 * (c[0] + c[1]), 0.5 * (c[1] + c[2]), 0.5 * (c[2] + c[0])];
    let children = [
        [c[0], m[0], m[2]],
        [m[0], c[1], m[1]],
        [m[2], m[1], c[2]],
        [m[0], m[1], m[2]],
    ];
    let mut seen = 0;
    for child in children {
        let cw = triangle_winding(f, child)?;
        if cw < 0 {
            return Err(Scan::Negative);
        }
        if cw > 0 {
            seen += cw as u32;
            resolve(f, child, cw as u32, depth + 1, out)?;
        }
    }
    if seen != w {
        return Err(Scan::NearContour);
    }
    Ok(())
}

/// Newton iteration with multiplicity factor from the cell barycentre.
fn newton(f: &impl Fn(C64) -> C64, c: [C64; 3], mult: u32) -> C64 {
    let start = (c[0] + c[1] + c[2]) / 3.0;
    let size = (c[1] - c[0]).norm().max((c[2] - c[0]).norm());
    let mut z = start;
    for _ in 0..60 {
        let eps = 1e-7 * (1.0 - z.norm_sqr());
        let fz = f(z);
        let df = (f(z + eps) - f(z - eps)) / (2.0 * eps);
        let step = fz / df * mult as f64;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if (z - start).norm() > 4.0 * size || z.norm_sqr() >= 1.0 {
            return start;
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
    z
}

/// Reduces raw zeros to the octagon and merges copies related by the group.
fn merge(group: &FuchsianGroup, raw: Vec<Zero>) -> Vec<Zero> {
    let images = group.elements_within(2.0 * circumradius() + 0.5);
    let mut out: Vec<Zero> = Vec::new();
    for zero in raw {
        let z = group.reduce_to_domain(zero.z).map(|r| r.0).unwrap_or(zero.z);
        let duplicate = out
            .iter()
            .any(|o| FuchsianGroup::orbit_distance(&images, o.z, z) < MERGE_RADIUS);
        if !duplicate {
            out.push(Zero {
                z,
                multiplicity: zero.multiplicity,
            });
        }
    }
    out
}
