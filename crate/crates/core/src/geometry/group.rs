//! The Bolza group: the Fuchsian group of the regular hyperbolic octagon with
//! opposite sides identified.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{PI, SQRT_2};

use super::mobius::{distance_from_origin, C64, MobiusMap};
use crate::error::{GclabError, Result};

/// `cosh` of half the translation length of a side-pairing generator.
pub const HALF_TRANSLATION_COSH: f64 = 1.0 + SQRT_2;

/// `cosh` of the Dirichlet-domain circumradius.
pub const CIRCUMRADIUS_COSH: f64 = 3.0 + 2.0 * SQRT_2;

pub const DEFAULT_BALL_CAP: usize = 2_000_000;

const MAX_REDUCTION_STEPS: usize = 10_000;

/// Translation length `ℓ` of each generator.
pub fn translation_length() -> f64 {
    2.0 * HALF_TRANSLATION_COSH.acosh()
}

/// Hyperbolic circumradius of the fundamental octagon.
pub fn circumradius() -> f64 {
    CIRCUMRADIUS_COSH.acosh()
}

/// Euclidean radius of the octagon corners in the disk chart.
pub fn corner_radius() -> f64 {
    (0.5 * circumradius()).tanh()
}

/// Chart coordinates of the eight octagon corners, at angles `π/8 + kπ/4`.
pub fn octagon_corners() -> [C64; 8] {
    let r = corner_radius();
    std::array::from_fn(|k| C64::from_polar(r, PI / 8.0 + k as f64 * PI / 4.0))
}

#[derive(Clone, Debug)]
pub struct FuchsianGroup {
    /// `γ_0..γ_3` followed by their inverses. `γ_k` maps side `k + 4` onto side `k`.
    pub generators: [MobiusMap; 8],
    /// Every element with `d(0, γ·0) ≤ r_cut`, identity first, in breadth-first order.
    pub ball_elements: Vec<MobiusMap>,
    pub r_cut: f64,
}

/// Builds the Bolza group with its displacement ball of radius `r_cut`.
pub fn build_bolza_group(r_cut: f64) -> Result<FuchsianGroup> {
    build_bolza_group_capped(r_cut, DEFAULT_BALL_CAP)
}

pub fn build_bolza_group_capped(r_cut: f64, cap: usize) -> Result<FuchsianGroup> {
    if !(r_cut >= 0.0) || !r_cut.is_finite() {
        return Err(GclabError::InvalidArgument(format!("r_cut = {r_cut}")));
    }
    let generators = bolza_generators();
    let ball_elements = enumerate_ball(&generators, r_cut, cap)?;
    Ok(FuchsianGroup {
        generators,
        ball_elements,
        r_cut,
    })
}

pub fn bolza_generators() -> [MobiusMap; 8] {
    let ell = translation_length();
    let forward: [MobiusMap; 4] = std::array::from_fn(|k| {
        let theta = k as f64 * PI / 4.0;
        MobiusMap::rotation(theta)
            .compose(&MobiusMap::real_translation(ell))
            .compose(&MobiusMap::rotation(-theta))
            .normalized()
    });
    std::array::from_fn(|i| {
        if i < 4 {
            forward[i]
        } else {
            forward[i - 4].inverse().normalized()
        }
    })
}

/// Orbit points `γ·0` on a grid; distinct group elements have orbit points at
/// least one translation length apart, so a 3×3 neighbourhood lookup is exact.
struct OrbitIndex {
    cells: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
}

impl OrbitIndex {
    fn new(cell: f64) -> Self {
        Self {
            cells: HashMap::new(),
            cell,
        }
    }

    fn key(&self, p: C64) -> (i64, i64) {
        (
            (p.re / self.cell).floor() as i64,
            (p.im / self.cell).floor() as i64,
        )
    }

    fn find(&self, p: C64, m: &MobiusMap, elements: &[MobiusMap]) -> Option<usize> {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.cells.get(&(kx + dx, ky + dy)) {
                    for &idx in list {
                        let e = &elements[idx];
                        let scale = e.a.norm();
                        if e.distance(m) <= 1e-6 * scale {
                            return Some(idx);
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, p: C64, idx: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(idx);
    }
}

fn enumerate_ball(generators: &[MobiusMap; 8], r_cut: f64, cap: usize) -> Result<Vec<MobiusMap>> {
    // Tiles met by the geodesic from 0 to γ·0 have centres within one
    // circumradius of it, so words through them stay inside r_cut + R.
    let search_radius = r_cut + circumradius() + 1e-9;
    let mut elements = vec![MobiusMap::IDENTITY];
    let mut displacement = vec![0.0];
    let mut index = OrbitIndex::new(1e-9);
    index.insert(C64::new(0.0, 0.0), 0);
    let mut queue = VecDeque::from([0usize]);

    while let Some(i) = queue.pop_front() {
        let base = elements[i];
        for g in generators {
            let m = base.compose(g).normalized();
            let d = m.displacement();
            if d > search_radius {
                continue;
            }
            let p = m.apply_unchecked(C64::new(0.0, 0.0));
            if index.find(p, &m, &elements).is_some() {
                continue;
            }
            if elements.len() >= cap {
                return Err(GclabError::BallTooLarge { cap });
            }
            let idx = elements.len();
            elements.push(m);
            displacement.push(d);
            index.insert(p, idx);
            queue.push_back(idx);
        }
    }

    Ok(elements
        .into_iter()
        .zip(displacement)
        .filter(|(_, d)| *d <= r_cut)
        .map(|(m, _)| m)
        .collect())
}

impl FuchsianGroup {
    /// Returns `(z₀, γ)` with `γ(z) = z₀` and `z₀` in the closed Dirichlet octagon.
    pub fn reduce_to_domain(&self, z: C64) -> Result<(C64, MobiusMap)> {
        if z.norm_sqr() >= 1.0 {
            return Err(GclabError::OutsideDisk { re: z.re, im: z.im });
        }
        let mut point = z;
        let mut acc = MobiusMap::IDENTITY;
        for _ in 0..MAX_REDUCTION_STEPS {
            let current = point.norm_sqr();
            let mut best: Option<(f64, usize, C64)> = None;
            for (k, g) in self.generators.iter().enumerate() {
                let w = g.apply_unchecked(point);
                let r = w.norm_sqr();
                if best.is_none_or(|(br, _, _)| r < br) {
                    best = Some((r, k, w));
                }
            }
            let (r, k, w) = best.expect("eight generators");
            if r < current * (1.0 - 1e-13) - 1e-15 {
                point = w;
                acc = self.generators[k].compose(&acc).normalized();
            } else {
                return Ok((point, acc));
            }
        }
        Err(GclabError::ReductionDiverged(MAX_REDUCTION_STEPS))
    }

    /// Whether `z` satisfies the Dirichlet inequalities against all generators.
    pub fn in_domain(&self, z: C64, slack: f64) -> bool {
        let d0 = distance_from_origin(z);
        self.generators
            .iter()
            .all(|g| distance_from_origin(g.apply_unchecked(z)) >= d0 - slack)
    }

    /// Ball elements with displacement at most `radius` (a prefix-free filter).
    pub fn elements_within(&self, radius: f64) -> Vec<MobiusMap> {
        self.ball_elements
            .iter()
            .filter(|m| m.displacement() <= radius)
            .copied()
            .collect()
    }

    /// Minimum hyperbolic distance between `z` and the orbit points `γ·w`,
    /// with `γ` drawn from `images`.
    pub fn orbit_distance(images: &[MobiusMap], z: C64, w: C64) -> f64 {
        images
            .iter()
            .map(|g| super::mobius::hyperbolic_distance(z, g.apply_unchecked(w)))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_sends_origin_to_tanh_half_length() {
        let g = build_bolza_group(0.0).unwrap();
        let z = g.generators[0].apply(C64::new(0.0, 0.0)).unwrap();
        let d = HALF_TRANSLATION_COSH.acosh();
        assert!((z - C64::new(d.tanh(), 0.0)).norm() < 1e-14);
        assert!((z.re - 0.91018).abs() < 1e-5);
    }

    #[test]
    fn zero_radius_ball_is_identity() {
        let g = build_bolza_group(0.0).unwrap();
        assert_eq!(g.ball_elements.len(), 1);
        assert!(g.ball_elements[0].distance(&MobiusMap::IDENTITY) < 1e-15);
    }

    #[test]
    fn generators_are_unimodular() {
        for m in bolza_generators() {
            assert!((m.det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circumradius_matches_right_triangle_identity() {
        let cot = 1.0 / (PI / 8.0).tan();
        assert!((CIRCUMRADIUS_COSH - cot * cot).abs() < 1e-12);
        assert!((CIRCUMRADIUS_COSH - 5.8284).abs() < 1e-4);
        let corner = octagon_corners()[0];
        assert!((distance_from_origin(corner) - circumradius()).abs() < 1e-12);
    }

    #[test]
    fn corners_sit_on_side_bisectors() {
        // each corner is equidistant from 0 and from the two adjacent neighbour centres
        let g = build_bolza_group(0.0).unwrap();
        let corners = octagon_corners();
        for (k, &v) in corners.iter().enumerate() {
            let d0 = distance_from_origin(v);
            let mut hits = 0;
            for gen in &g.generators {
                let c = gen.inverse().apply_unchecked(C64::new(0.0, 0.0));
                let d = super::super::mobius::hyperbolic_distance(v, c);
                if (d - d0).abs() < 1e-10 {
                    hits += 1;
                }
            }
            assert_eq!(hits, 2, "corner {k}");
        }
    }

    #[test]
    fn interior_angle_sum_is_two_pi() {
        // angle at a corner between the geodesics to its two neighbouring corners
        let corners = octagon_corners();
        let v = corners[0];
        let to_origin = MobiusMap::moving_to_origin(v);
        let a = to_origin.apply_unchecked(corners[1]);
        let b = to_origin.apply_unchecked(corners[7]);
        let angle = (a / b).arg().abs();
        assert!((angle - PI / 4.0).abs() < 1e-12);
        assert!((8.0 * angle - 2.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn reduce_single_step() {
        let g = build_bolza_group(0.0).unwrap();
        let z = g.generators[0].apply(C64::new(0.1, 0.0)).unwrap();
        let (z0, m) = g.reduce_to_domain(z).unwrap();
        assert!((z0 - C64::new(0.1, 0.0)).norm() < 1e-12);
        assert!(m.distance(&g.generators[4]) < 1e-12);
    }

    #[test]
    fn reduce_fixes_domain_points() {
        let g = build_bolza_group(0.0).unwrap();
        let z = C64::new(0.2, -0.3);
        let (z0, m) = g.reduce_to_domain(z).unwrap();
        assert_eq!(z0, z);
        assert!(m.distance(&MobiusMap::IDENTITY) < 1e-15);
    }

    #[test]
    fn ball_growth_is_monotone_and_exponential() {
        let counts: Vec<usize> = [4.0, 6.0, 8.0]
            .iter()
            .map(|&r| build_bolza_group(r).unwrap().ball_elements.len())
            .collect();
        assert!(counts[0] <= counts[1] && counts[1] <= counts[2]);
        // orbit counting: N(r) ~ (cosh r − 1)/(2(g−1)) = (cosh r − 1)/2
        let ratio = counts[2] as f64 / counts[1] as f64;
        let e2 = (2.0f64).exp();
        assert!(ratio > 0.5 * e2 && ratio < 2.0 * e2, "ratio {ratio}");
    }

    #[test]
    fn ball_cap_is_enforced() {
        assert!(matches!(
            build_bolza_group_capped(8.0, 100),
            Err(GclabError::BallTooLarge { cap: 100 })
        ));
    }
}
