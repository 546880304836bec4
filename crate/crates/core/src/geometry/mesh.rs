//! Triangulation of the fundamental octagon and the discrete operators on the
//! closed surface obtained by gluing its sides.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use super::group::{build_bolza_group, circumradius, octagon_corners, FuchsianGroup};
use super::mobius::{conformal_factor, geodesic_midpoint, hyperbolic_distance, C64, MobiusMap};
use crate::error::{GclabError, Result};

const MIN_CHART_AREA: f64 = 1e-14;

/// A boundary vertex glued to its master: `position[slave] = map(position[master])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Identification {
    pub slave: usize,
    pub master: usize,
    pub map: MobiusMap,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    /// Chart coordinates of every raw vertex, glued copies included.
    pub vertices: Vec<C64>,
    /// Counter-clockwise raw vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Raw vertex index → logical vertex index.
    pub logical: Vec<usize>,
    /// Representative (master) chart point of each logical vertex.
    pub points: Vec<C64>,
    /// Lumped hyperbolic area per logical vertex.
    pub vertex_area: Vec<f64>,
    pub identification: Vec<Identification>,
    pub level: u32,
}

#[derive(Clone, Debug)]
pub struct DiscreteOperators {
    /// Cotangent stiffness on logical vertices, `uᵀKu ≈ ∫|∇u|² dA`.
    pub stiffness: CsMat<f64>,
    /// Lumped mass diagonal.
    pub mass: Vec<f64>,
}

impl SurfaceMesh {
    pub fn logical_count(&self) -> usize {
        self.points.len()
    }

    pub fn total_area(&self) -> f64 {
        self.vertex_area.iter().sum()
    }

    /// Declared relative area tolerance: 0.5% at level 3, quartered per level.
    pub fn area_tolerance(&self) -> f64 {
        5e-3 * 4f64.powi(3 - self.level as i32)
    }

    /// Logical triangles (glued indices).
    pub fn logical_triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.triangles
            .iter()
            .map(|t| [self.logical[t[0]], self.logical[t[1]], self.logical[t[2]]])
    }

    /// Sorted neighbour lists of the logical vertex graph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.logical_count()];
        for t in self.logical_triangles() {
            for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if p != q {
                    adj[p].push(q);
                    adj[q].push(p);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Longest hyperbolic edge of the chart triangulation.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(p, q)| hyperbolic_distance(self.vertices[p], self.vertices[q]))
            })
            .fold(0.0, f64::max)
    }

    /// Mean hyperbolic length of the edges at each logical vertex.
    pub fn local_edge_length(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.logical_count()];
        let mut cnt = vec![0usize; self.logical_count()];
        for t in &self.triangles {
            for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let d = hyperbolic_distance(self.vertices[p], self.vertices[q]);
                for v in [p, q] {
                    sum[self.logical[v]] += d;
                    cnt[self.logical[v]] += 1;
                }
            }
        }
        sum.iter().zip(&cnt).map(|(s, &c)| s / c.max(1) as f64).collect()
    }

    /// Hyperbolic area of a chart triangle by the edge-midpoint rule.
    pub fn triangle_area(&self, tri: &[usize; 3]) -> f64 {
        let [p, q, r] = tri.map(|i| self.vertices[i]);
        let euclid = 0.5 * ((q - p).re * (r - p).im - (q - p).im * (r - p).re);
        let lam = (conformal_factor(0.5 * (p + q))
            + conformal_factor(0.5 * (q + r))
            + conformal_factor(0.5 * (r + p)))
            / 3.0;
        euclid * lam
    }
}

/// Sums `Σ_i vertex_area_i · f_i`.
pub fn integrate(mesh: &SurfaceMesh, f: &[f64]) -> Result<f64> {
    check_len(mesh.logical_count(), f.len())?;
    Ok(mesh.vertex_area.iter().zip(f).map(|(w, v)| w * v).sum())
}

pub fn integrate_complex(mesh: &SurfaceMesh, f: &[Complex64]) -> Result<Complex64> {
    check_len(mesh.logical_count(), f.len())?;
    Ok(mesh
        .vertex_area
        .iter()
        .zip(f)
        .map(|(w, v)| v * *w)
        .sum())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(GclabError::ShapeMismatch { expected, got });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tag {
    Interior,
    Corner(usize),
    Side(usize),
}

/// Fan-triangulates the octagon, refines `level` times by geodesic edge
/// midpoints, glues the sides, and assembles stiffness and lumped mass.
pub fn build_mesh(group: &FuchsianGroup, level: u32) -> Result<(SurfaceMesh, DiscreteOperators)> {
    let corners = octagon_corners();
    let mut vertices = vec![C64::new(0.0, 0.0)];
    let mut tags = vec![Tag::Interior];
    for (k, c) in corners.iter().enumerate() {
        vertices.push(*c);
        tags.push(Tag::Corner(k));
    }
    let mut triangles: Vec<[usize; 3]> = (0..8).map(|k| [0, 1 + k, 1 + (k + 1) % 8]).collect();
    // corner k → corner k+1 runs along the side facing angle (k+1)π/4
    let mut boundary: HashMap<(usize, usize), usize> = (0..8)
        .map(|k| (edge_key(1 + k, 1 + (k + 1) % 8), (k + 1) % 8))
        .collect();

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_boundary = HashMap::new();
        let mut next = Vec::with_capacity(4 * triangles.len());
        let mut mid = |p: usize, q: usize, vertices: &mut Vec<C64>, tags: &mut Vec<Tag>| -> usize {
            let key = edge_key(p, q);
            if let Some(&m) = midpoints.get(&key) {
                return m;
            }
            let m = vertices.len();
            vertices.push(geodesic_midpoint(vertices[key.0], vertices[key.1]));
            tags.push(match boundary.get(&key) {
                Some(&side) => {
                    next_boundary.insert(edge_key(key.0, m), side);
                    next_boundary.insert(edge_key(m, key.1), side);
                    Tag::Side(side)
                }
                None => Tag::Interior,
            });
            midpoints.insert(key, m);
            m
        };
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices, &mut tags);
            let bc = mid(b, c, &mut vertices, &mut tags);
            let ca = mid(c, a, &mut vertices, &mut tags);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        triangles = next;
        boundary = next_boundary;
    }

    let boundary_edges: Vec<(usize, usize)> = {
        let mut e: Vec<_> = boundary.keys().copied().collect();
        e.sort_unstable();
        e
    };
    let identification = glue(group, &vertices, &tags)?;
    let mut is_slave = vec![false; vertices.len()];
    for id in &identification {
        is_slave[id.slave] = true;
    }
    let mut logical = vec![usize::MAX; vertices.len()];
    let mut points = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if !is_slave[i] {
            logical[i] = points.len();
            points.push(*v);
        }
    }
    for id in &identification {
        logical[id.slave] = logical[id.master];
    }

    let mut mesh = SurfaceMesh {
        vertices,
        triangles,
        logical,
        points,
        vertex_area: Vec::new(),
        identification,
        level,
    };
    let ops = assemble(&mut mesh, &boundary_edges)?;
    Ok((mesh, ops))
}

fn edge_key(p: usize, q: usize) -> (usize, usize) {
    if p < q {
        (p, q)
    } else {
        (q, p)
    }
}

fn glue(group: &FuchsianGroup, vertices: &[C64], tags: &[Tag]) -> Result<Vec<Identification>> {
    let mut out = Vec::new();

    // corners: all eight are one point of the surface
    let short_words = build_bolza_group(2.0 * circumradius() + 0.5)?.ball_elements;
    let corner_index: Vec<usize> = (0..8)
        .map(|k| tags.iter().position(|t| *t == Tag::Corner(k)).expect("corner"))
        .collect();
    let master = corner_index[0];
    for &slave in &corner_index[1..] {
        let map = short_words
            .iter()
            .find(|m| (m.apply_unchecked(vertices[master]) - vertices[slave]).norm() < 1e-10)
            .copied()
            .ok_or_else(|| GclabError::InvalidArgument("corner without gluing map".into()))?;
        out.push(Identification { slave, master, map });
    }

    // sides k < 4 are images of sides k + 4 under γ_k
    for k in 0..4 {
        let gen = group.generators[k];
        let masters: Vec<usize> = (0..vertices.len())
            .filter(|&i| tags[i] == Tag::Side(k + 4))
            .collect();
        for slave in (0..vertices.len()).filter(|&i| tags[i] == Tag::Side(k)) {
            let pre = gen.inverse().apply_unchecked(vertices[slave]);
            let m = masters
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    (vertices[x] - pre)
                        .norm()
                        .total_cmp(&(vertices[y] - pre).norm())
                })
                .ok_or_else(|| GclabError::InvalidArgument("unpaired side vertex".into()))?;
            if (gen.apply_unchecked(vertices[m]) - vertices[slave]).norm() > 1e-10 {
                return Err(GclabError::InvalidArgument(format!(
                    "side vertex {slave} has no partner on side {}",
                    k + 4
                )));
            }
            out.push(Identification {
                slave,
                master: m,
                map: gen,
            });
        }
    }
    out.sort_by_key(|id| id.slave);
    Ok(out)
}

fn assemble(mesh: &mut SurfaceMesh, boundary_edges: &[(usize, usize)]) -> Result<DiscreteOperators> {
    let n = mesh.logical_count();
    let boundary: std::collections::HashSet<(usize, usize)> = boundary_edges.iter().copied().collect();
    let mut area = vec![0.0; n];
    let mut trip = TriMat::new((n, n));
    for (idx, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.vertices[i]);
        let euclid = 0.5 * ((p[1] - p[0]).re * (p[2] - p[0]).im - (p[1] - p[0]).im * (p[2] - p[0]).re);
        if euclid < MIN_CHART_AREA {
            return Err(GclabError::DegenerateTriangle { index: idx, area: euclid });
        }
        let mut hyp = mesh.triangle_area(tri);
        // chords on the glued sides overshoot the geodesic boundary
        for k in 0..3 {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            if boundary.contains(&edge_key(i, j)) {
                hyp -= sliver_area(mesh.vertices[i], mesh.vertices[j]);
            }
        }
        for &v in tri {
            area[mesh.logical[v]] += hyp / 3.0;
        }
        // edge opposite corner k carries ½ cot of the angle at k
        for k in 0..3 {
            let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            let dot = e1.re * e2.re + e1.im * e2.im;
            let cross = e1.re * e2.im - e1.im * e2.re;
            let w = 0.5 * dot / cross;
            let (li, lj) = (mesh.logical[i], mesh.logical[j]);
            if li == lj {
                continue;
            }
            trip.add_triplet(li, li, w);
            trip.add_triplet(lj, lj, w);
            trip.add_triplet(li, lj, -w);
            trip.add_triplet(lj, li, -w);
        }
    }
    mesh.vertex_area = area.clone();
    Ok(DiscreteOperators {
        stiffness: trip.to_csr(),
        mass: area,
    })
}

/// Hyperbolic area between the chord `p q` and the geodesic through `p, q`,
/// from the boundary integral of `2(x dy − y dx)/(1 − |z|²)`.
pub fn sliver_area(p: C64, q: C64) -> f64 {
    let chord = line_integral(|s| p + (q - p) * s, |_| q - p);
    let to_origin = MobiusMap::moving_to_origin(p);
    let back = to_origin.inverse();
    let w = to_origin.apply_unchecked(q);
    let (r, dir) = (w.norm(), w / w.norm());
    let half = r.atanh();
    let arc_point = |s: f64| back.apply_unchecked(dir * (s * half).tanh());
    let arc_tangent = |s: f64| {
        let x = dir * (s * half).tanh();
        let dx = dir * (half / (s * half).cosh().powi(2));
        back.derivative_unchecked(x) * dx
    };
    let arc = line_integral(arc_point, arc_tangent);
    (chord - arc).abs()
}

fn line_integral(point: impl Fn(f64) -> C64, tangent: impl Fn(f64) -> C64) -> f64 {
    // 8-point Gauss–Legendre on [0, 1]
    const NODES: [f64; 4] = [0.183434642495650, 0.525532409916329, 0.796666477413627, 0.960289856497536];
    const WEIGHTS: [f64; 4] = [0.362683783378362, 0.313706645877887, 0.222381034453374, 0.101228536290376];
    let mut acc = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        for s in [0.5 * (1.0 - x), 0.5 * (1.0 + x)] {
            let z = point(s);
            let dz = tangent(s);
            let form = 2.0 * (z.re * dz.im - z.im * dz.re) / (1.0 - z.norm_sqr());
            acc += 0.5 * w * form;
        }
    }
    acc
}

impl DiscreteOperators {
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (row, vec) in self.stiffness.outer_iterator().enumerate() {
            out[row] = vec.iter().map(|(col, v)| v * u[col]).sum();
        }
        out
    }

    /// `uᵀ K u`.
    pub fn dirichlet(&self, u: &[f64]) -> f64 {
        self.apply_stiffness(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Factorizes `K + diag(shift)`.
    pub fn factor_shifted(&self, shift: &[f64]) -> Result<LdlNumeric<f64, usize>> {
        let n = self.mass.len();
        let mut trip = TriMat::new((n, n));
        for (row, vec) in self.stiffness.outer_iterator().enumerate() {
            for (col, v) in vec.iter() {
                trip.add_triplet(row, col, *v);
            }
        }
        for (i, s) in shift.iter().enumerate() {
            trip.add_triplet(i, i, *s);
        }
        let mat: CsMat<f64> = trip.to_csc();
        Ldl::new()
            .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
            .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
            .numeric(mat.view())
            .map_err(|e| GclabError::Factorization(format!("{e:?}")))
    }

    /// Smallest nonzero eigenvalue of `K v = μ M v` by shift-inverted power
    /// iteration with the constants deflated.
    pub fn lowest_nonzero_eigenvalue(&self, tol: f64, max_iter: usize) -> Result<f64> {
        let n = self.mass.len();
        let ldl = self.factor_shifted(&self.mass)?;
        let total: f64 = self.mass.iter().sum();
        let deflate = |v: &mut Vec<f64>| {
            let mean: f64 = v.iter().zip(&self.mass).map(|(x, m)| x * m).sum::<f64>() / total;
            v.iter_mut().for_each(|x| *x -= mean);
        };
        let mut v: Vec<f64> = (0..n)
            .map(|i| ((i as f64 * 0.7548776662).fract() - 0.5) + (i as f64 * 0.5698402910).fract())
            .collect();
        deflate(&mut v);
        let mut mu = f64::NAN;
        for _ in 0..max_iter {
            let rhs: Vec<f64> = v.iter().zip(&self.mass).map(|(x, m)| x * m).collect();
            let mut w = ldl.solve(&rhs);
            deflate(&mut w);
            let mnorm = w.iter().zip(&self.mass).map(|(x, m)| x * x * m).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= mnorm);
            let rayleigh = self.dirichlet(&w);
            v = w;
            if (rayleigh - mu).abs() <= tol * rayleigh.abs() {
                return Ok(rayleigh);
            }
            mu = rayleigh;
        }
        Ok(mu)
    }
}

/// Exact hyperbolic area of a closed genus-`genus` surface.
pub fn gauss_bonnet_area(genus: u32) -> f64 {
    4.0 * PI * (genus as f64 - 1.0)
}
