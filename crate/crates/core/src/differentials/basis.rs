//! Orthonormal basis of holomorphic κ-differentials sampled on the mesh.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::poincare::{poincare_series_all, poincare_series_reduced};
use crate::error::{GclabError, Result};
use crate::geometry::group::octagon_corners;
use crate::geometry::mesh::sliver_area;
use crate::geometry::{conformal_factor, FuchsianGroup, MobiusMap, SurfaceMesh, C64, GENUS};

pub const DEFAULT_POWER_COUNT: usize = 8;
pub const DEFAULT_R_CUT: f64 = 10.0;

/// Hermitian `nu × nu` Gram matrix.
pub type GramMatrix = DMatrix<C64>;
const RANK_THRESHOLD: f64 = 1e-8;

/// Coefficients `c` of a harmonic class `[β]` in the orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCoeffs(pub Vec<C64>);

/// Coefficients `a` of `α = Σ_j a_j s_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCoeffs(pub Vec<C64>);

impl ClassCoeffs {
    pub fn zero(nu: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); nu])
    }

    pub fn unit(nu: usize, j: usize) -> Self {
        let mut c = Self::zero(nu);
        c.0[j] = C64::new(1.0, 0.0);
        c
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == C64::new(0.0, 0.0))
    }

    pub fn scaled(&self, mu: C64) -> Self {
        Self(self.0.iter().map(|x| x * mu).collect())
    }

    /// Unit-norm class with independent complex Gaussian coordinates.
    pub fn random(nu: usize, seed: u64) -> Self {
        Self(random_unit(nu, seed))
    }

    /// Projection onto the unit sphere; the zero class is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(C64::new(1.0 / n, 0.0))
    }
}

fn random_unit(nu: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..nu)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

impl AlphaCoeffs {
    /// Unit-norm coefficients with independent complex Gaussian entries.
    pub fn random(nu: usize, seed: u64) -> Self {
        Self(random_unit(nu, seed))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn scaled(&self, mu: C64) -> Self {
        Self(self.0.iter().map(|x| x * mu).collect())
    }
}

/// Dimension of the space of holomorphic κ-differentials, `(2κ − 1)(g − 1)`.
pub fn differential_dimension(kappa: u32, genus: u32) -> usize {
    ((2 * kappa - 1) * (genus - 1)) as usize
}

#[derive(Clone, Debug)]
pub struct DifferentialBasis {
    pub kappa: u32,
    pub nu: usize,
    pub r_cut: f64,
    pub power_count: usize,
    /// Seed-series → basis coefficients, `power_count × nu`.
    pub transform: DMatrix<C64>,
    /// `h_j(z_i)` at the logical vertices, row-major `n × nu`.
    pub samples: Vec<C64>,
    /// `h_j(z_i) λ(z_i)^{−κ/2}`, row-major `n × nu`.
    pub fiber: Vec<C64>,
    /// Quadrature weights the basis is orthonormal against.
    pub weights: Vec<f64>,
    pub group: Arc<FuchsianGroup>,
}

/// Evaluates the seed series at every logical vertex, forms the
/// Weil–Petersson Gram matrix, and keeps the `nu` leading eigendirections.
pub fn build_basis(
    group: Arc<FuchsianGroup>,
    mesh: &SurfaceMesh,
    kappa: u32,
    power_count: usize,
) -> Result<DifferentialBasis> {
    if kappa < 2 {
        return Err(GclabError::InvalidArgument(format!("kappa = {kappa} < 2")));
    }
    let nu = differential_dimension(kappa, GENUS);
    if power_count < nu {
        return Err(GclabError::InvalidArgument(format!(
            "power_count {power_count} < dimension {nu}"
        )));
    }
    let seeds = seeds_at(&group, mesh, kappa, power_count);
    let transform = orthonormalizing_transform(&seeds, &mesh.points, &mesh.vertex_area, kappa, nu)?;
    Ok(DifferentialBasis::from_seeds(
        group,
        mesh,
        kappa,
        power_count,
        transform,
        &seeds,
    ))
}

fn seed_gram(seeds: &[Vec<C64>], points: &[C64], weights: &[f64], kappa: u32) -> DMatrix<C64> {
    let p = seeds[0].len();
    let mut gram = DMatrix::<C64>::zeros(p, p);
    for ((s, z), w) in seeds.iter().zip(points).zip(weights) {
        let scale = w * conformal_factor(*z).powi(-(kappa as i32));
        for m in 0..p {
            let sm = s[m].conj() * scale;
            for n in 0..p {
                gram[(m, n)] += sm * s[n];
            }
        }
    }
    gram
}

fn seeds_at(group: &FuchsianGroup, mesh: &SurfaceMesh, kappa: u32, power_count: usize) -> Vec<Vec<C64>> {
    mesh.points
        .par_iter()
        .map(|&z| poincare_series_all(group, kappa, power_count, z))
        .collect()
}

/// Eigenvalues of the seed-series Gram matrix relative to the largest, in
/// decreasing order, and the numerical rank they imply.
pub fn seed_spectrum(
    group: &FuchsianGroup,
    mesh: &SurfaceMesh,
    kappa: u32,
    power_count: usize,
) -> (Vec<f64>, usize) {
    let seeds = seeds_at(group, mesh, kappa, power_count);
    let eig = SymmetricEigen::new(seed_gram(&seeds, &mesh.points, &mesh.vertex_area, kappa));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let largest = values[0];
    values.iter_mut().for_each(|v| *v /= largest);
    let rank = values.iter().filter(|&&v| v > RANK_THRESHOLD).count();
    (values, rank)
}

fn orthonormalizing_transform(
    seeds: &[Vec<C64>],
    points: &[C64],
    weights: &[f64],
    kappa: u32,
    nu: usize,
) -> Result<DMatrix<C64>> {
    let p = seeds[0].len();
    let gram = seed_gram(seeds, points, weights, kappa);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let largest = eig.eigenvalues[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > RANK_THRESHOLD * largest)
        .collect();
    if kept.len() < nu {
        return Err(GclabError::RankDeficient {
            found: kept.len(),
            required: nu,
        });
    }
    if kept.len() > nu {
        log::warn!(
            "{} Gram directions survive for dimension {nu}; truncation too coarse?",
            kept.len()
        );
    }
    let mut t = DMatrix::<C64>::zeros(p, nu);
    for (j, &i) in kept.iter().take(nu).enumerate() {
        let v = eig.eigenvectors.column(i);
        // fix the phase: largest component real positive
        let pivot = (0..p)
            .max_by(|&x, &y| v[x].norm().total_cmp(&v[y].norm()))
            .expect("nonempty");
        let phase = v[pivot].conj() / v[pivot].norm();
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for m in 0..p {
            t[(m, j)] = v[m] * phase * s;
        }
    }
    Ok(t)
}

impl DifferentialBasis {
    /// Reassembles a basis from a stored transform (cache reload path).
    pub fn from_transform(
        group: Arc<FuchsianGroup>,
        mesh: &SurfaceMesh,
        kappa: u32,
        power_count: usize,
        transform: DMatrix<C64>,
        samples: Vec<C64>,
    ) -> Self {
        let nu = transform.ncols();
        let fiber = fiber_samples(&samples, &mesh.points, kappa, nu);
        Self {
            kappa,
            nu,
            r_cut: group.r_cut,
            power_count,
            transform,
            samples,
            fiber,
            weights: mesh.vertex_area.clone(),
            group,
        }
    }

    fn from_seeds(
        group: Arc<FuchsianGroup>,
        mesh: &SurfaceMesh,
        kappa: u32,
        power_count: usize,
        transform: DMatrix<C64>,
        seeds: &[Vec<C64>],
    ) -> Self {
        let nu = transform.ncols();
        let mut samples = Vec::with_capacity(seeds.len() * nu);
        for s in seeds {
            samples.extend(combine(&transform, s));
        }
        Self::from_transform(group, mesh, kappa, power_count, transform, samples)
    }

    pub fn vertex_count(&self) -> usize {
        self.weights.len()
    }

    /// `h_j(z)` at an arbitrary disk point.
    pub fn eval(&self, z: C64) -> Result<Vec<C64>> {
        let seeds = poincare_series_reduced(&self.group, self.kappa, self.power_count, z)?;
        Ok(combine(&self.transform, &seeds))
    }

    /// Batch evaluation, order-preserving.
    pub fn eval_many(&self, points: &[C64]) -> Result<Vec<Vec<C64>>> {
        points.par_iter().map(|&z| self.eval(z)).collect()
    }

    /// `h_j(z)` from the raw (unreduced) truncated series.
    pub fn eval_unreduced(&self, z: C64) -> Vec<C64> {
        let seeds = poincare_series_all(&self.group, self.kappa, self.power_count, z);
        combine(&self.transform, &seeds)
    }

    /// Fiber values `h_j(z_i) λ^{−κ/2}` of vertex `i`.
    pub fn fiber_row(&self, i: usize) -> &[C64] {
        &self.fiber[i * self.nu..(i + 1) * self.nu]
    }

    pub fn sample_row(&self, i: usize) -> &[C64] {
        &self.samples[i * self.nu..(i + 1) * self.nu]
    }

    /// `Σ_j a_j h_j(z_i) λ^{−κ/2}` at every vertex.
    pub fn alpha_fiber(&self, a: &AlphaCoeffs) -> Vec<C64> {
        (0..self.vertex_count())
            .map(|i| dot(self.fiber_row(i), &a.0))
            .collect()
    }

    /// `Σ_j a_j h_j(z_i)` at every vertex.
    pub fn alpha_samples(&self, a: &AlphaCoeffs) -> Vec<C64> {
        (0..self.vertex_count())
            .map(|i| dot(self.sample_row(i), &a.0))
            .collect()
    }

    /// Fiberwise norm `|Σ a_j h_j(z)| λ(z)^{−κ/2}`.
    pub fn fiber_norm_alpha(&self, a: &AlphaCoeffs, z: C64) -> Result<f64> {
        let h = self.eval(z)?;
        Ok(dot(&h, &a.0).norm() * conformal_factor(z).powf(-0.5 * self.kappa as f64))
    }

    /// `∫_X β_0 ∧ α` for `β_0` the harmonic representative with coefficients
    /// `c`, computed as the L² pairing of the two differentials on the build
    /// quadrature. Conjugate-linear in `c`, linear in `a`.
    pub fn wedge_pair(&self, c: &ClassCoeffs, a: &AlphaCoeffs) -> C64 {
        (0..self.vertex_count())
            .map(|i| {
                let row = self.fiber_row(i);
                dot(row, &c.0).conj() * dot(row, &a.0) * self.weights[i]
            })
            .sum()
    }

    /// The linear functional `α ↦ wedge_pair(c, α)` in basis coordinates.
    pub fn functional(&self, c: &ClassCoeffs) -> Vec<C64> {
        (0..self.nu)
            .map(|j| {
                let mut e = vec![C64::new(0.0, 0.0); self.nu];
                e[j] = C64::new(1.0, 0.0);
                self.wedge_pair(c, &AlphaCoeffs(e))
            })
            .collect()
    }

    /// Gram matrix `Σ_i w_i conj(φ_j) φ_k` for arbitrary vertex weights.
    pub fn weighted_gram_with(&self, weights: &[f64]) -> DMatrix<C64> {
        let nu = self.nu;
        let mut g = DMatrix::<C64>::zeros(nu, nu);
        for (i, w) in weights.iter().enumerate() {
            let row = self.fiber_row(i);
            for j in 0..nu {
                let rj = row[j].conj() * *w;
                for k in 0..nu {
                    g[(j, k)] += rj * row[k];
                }
            }
        }
        g
    }

    /// Gram matrix on the build quadrature.
    pub fn gram(&self) -> DMatrix<C64> {
        self.weighted_gram_with(&self.weights)
    }

    /// Gram matrix on the triangle-barycentre rule, an independent quadrature.
    pub fn gram_barycentric(&self, mesh: &SurfaceMesh) -> Result<DMatrix<C64>> {
        let nu = self.nu;
        let kappa = self.kappa as i32;
        let boundary = boundary_chords(mesh);
        let mut nodes = Vec::new();
        for tri in &mesh.triangles {
            let [p, q, r] = tri.map(|i| mesh.vertices[i]);
            let euclid = 0.5 * ((q - p).re * (r - p).im - (q - p).im * (r - p).re);
            let b = (p + q + r) / 3.0;
            nodes.push((b, euclid * conformal_factor(b)));
        }
        for (p, q) in boundary {
            nodes.push((0.5 * (p + q), -sliver_area(p, q)));
        }
        let points: Vec<C64> = nodes.iter().map(|n| n.0).collect();
        let values = self.eval_many(&points)?;
        let mut g = DMatrix::<C64>::zeros(nu, nu);
        for ((z, w), h) in nodes.iter().zip(&values) {
            let scale = w * conformal_factor(*z).powi(-kappa);
            for j in 0..nu {
                let hj = h[j].conj() * scale;
                for k in 0..nu {
                    g[(j, k)] += hj * h[k];
                }
            }
        }
        Ok(g)
    }
}

impl DifferentialBasis {
    /// `max_j max_γ |h_j(γz) γ′(z)^κ − h_j(z)| / max|h_j|` over the generators
    /// and the given points, using the reducing evaluator.
    pub fn automorphy_residual(&self, points: &[C64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &z in points {
            let h = self.eval(z)?;
            scale = h.iter().fold(scale, |m, v| m.max(v.norm()));
            for g in &self.group.generators {
                let hg = self.eval(g.apply(z)?)?;
                let factor = g.derivative(z)?.powu(self.kappa);
                for (a, b) in hg.iter().zip(&h) {
                    worst = worst.max((a * factor - b).norm());
                }
            }
        }
        Ok(worst / scale)
    }

    /// Automorphy residual of the raw truncated series across the glued
    /// sides: `z` on side `k + 4` against `γ_k z` on side `k`.
    pub fn seam_residual(&self, per_side: usize) -> f64 {
        let corners = octagon_corners();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..4 {
            let (p, q) = (corners[(k + 3) % 8], corners[(k + 4) % 8]);
            let to_origin = MobiusMap::moving_to_origin(p);
            let w = to_origin.apply_unchecked(q);
            let len = w.norm().atanh();
            for i in 1..per_side + 1 {
                let s = i as f64 / (per_side + 1) as f64;
                let z = to_origin.inverse().apply_unchecked(w * ((len * s).tanh() / w.norm()));
                let g = &self.group.generators[k];
                let h = self.eval_unreduced(z);
                let hg = self.eval_unreduced(g.apply_unchecked(z));
                let factor = g.derivative_unchecked(z).powu(self.kappa);
                for (a, b) in hg.iter().zip(&h) {
                    worst = worst.max((a * factor - b).norm());
                    scale = scale.max(b.norm());
                }
            }
        }
        worst / scale
    }
}

/// Chart endpoints of the chords lying on the octagon sides (edges owned by
/// a single raw triangle).
fn boundary_chords(mesh: &SurfaceMesh) -> Vec<(C64, C64)> {
    let mut count = std::collections::HashMap::new();
    for t in &mesh.triangles {
        for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = if p < q { (p, q) } else { (q, p) };
            *count.entry(key).or_insert(0usize) += 1;
        }
    }
    let mut edges: Vec<(usize, usize)> = count
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|(k, _)| k)
        .collect();
    edges.sort_unstable();
    edges
        .into_iter()
        .map(|(p, q)| (mesh.vertices[p], mesh.vertices[q]))
        .collect()
}

fn fiber_samples(samples: &[C64], points: &[C64], kappa: u32, nu: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(samples.len());
    for (i, z) in points.iter().enumerate() {
        let s = conformal_factor(*z).powf(-0.5 * kappa as f64);
        out.extend(samples[i * nu..(i + 1) * nu].iter().map(|h| h * s));
    }
    out
}

fn combine(transform: &DMatrix<C64>, seeds: &[C64]) -> Vec<C64> {
    (0..transform.ncols())
        .map(|j| (0..transform.nrows()).map(|m| seeds[m] * transform[(m, j)]).sum())
        .collect()
}

#[inline]
pub(crate) fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
