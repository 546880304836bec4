mod common;

use std::f64::consts::PI;

use gclab::geometry::group::{octagon_corners, CIRCUMRADIUS_COSH};
use gclab::geometry::mobius::geodesic_midpoint;
use gclab::geometry::{build_bolza_group, build_mesh, hyperbolic_distance, integrate, MobiusMap, C64};
use proptest::prelude::*;

fn disk_point() -> impl Strategy<Value = C64> {
    (0.0..0.95f64, 0.0..2.0 * PI).prop_map(|(r, th)| C64::from_polar(r, th))
}

fn disk_map() -> impl Strategy<Value = MobiusMap> {
    (disk_point(), 0.0..2.0 * PI)
        .prop_map(|(p, th)| MobiusMap::rotation(th).compose(&MobiusMap::moving_to_origin(p)))
}

proptest! {
    #[test]
    fn disk_automorphisms_are_isometries(m in disk_map(), z in disk_point(), w in disk_point()) {
        let d = hyperbolic_distance(z, w);
        let dm = hyperbolic_distance(m.apply(z).unwrap(), m.apply(w).unwrap());
        prop_assert!((d - dm).abs() <= 1e-8 * (1.0 + d), "{d} vs {dm}");
    }

    #[test]
    fn inverse_undoes_the_map(m in disk_map(), z in disk_point()) {
        let back = m.inverse().apply(m.apply(z).unwrap()).unwrap();
        prop_assert!((back - z).norm() < 1e-10);
    }

    #[test]
    fn midpoint_halves_the_distance(z in disk_point(), w in disk_point()) {
        let m = geodesic_midpoint(z, w);
        let d = hyperbolic_distance(z, w);
        prop_assert!((hyperbolic_distance(z, m) - d / 2.0).abs() < 1e-7 * (1.0 + d));
        prop_assert!((hyperbolic_distance(m, w) - d / 2.0).abs() < 1e-7 * (1.0 + d));
    }

    #[test]
    fn reduction_lands_in_the_octagon(z in disk_point()) {
        let group = &common::lab().group;
        let (z0, gamma) = group.reduce_to_domain(z).unwrap();
        prop_assert!(group.in_domain(z0, 1e-9));
        prop_assert!((gamma.apply(z).unwrap() - z0).norm() < 1e-8);
        let r = hyperbolic_distance(z0, C64::new(0.0, 0.0));
        prop_assert!(r.cosh() <= CIRCUMRADIUS_COSH * (1.0 + 1e-9));
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_nonnegative(shift in -5.0..5.0f64, coeffs in prop::collection::vec(-1.0..1.0f64, 8)) {
        let lab = common::lab();
        let n = lab.mesh.logical_count();
        let u: Vec<f64> = (0..n)
            .map(|i| shift + coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * i as f64 * 0.37).sin()).sum::<f64>())
            .collect();
        let shifted: Vec<f64> = u.iter().map(|x| x - shift).collect();
        let e = lab.ops.dirichlet(&u);
        prop_assert!(e >= -1e-12);
        prop_assert!((e - lab.ops.dirichlet(&shifted)).abs() <= 1e-9 * (1.0 + e));
    }
}

#[test]
fn generators_pair_opposite_sides() {
    let g = build_bolza_group(0.0).unwrap();
    let corners = octagon_corners();
    for k in 0..4 {
        // γ_k maps the side between corners k+3, k+4 onto the one between k+7, k.
        let a = g.generators[k].apply(corners[(k + 3) % 8]).unwrap();
        let b = g.generators[k].apply(corners[(k + 4) % 8]).unwrap();
        let targets = [corners[(k + 7) % 8], corners[k % 8]];
        for p in [a, b] {
            let near = targets.iter().map(|t| (p - t).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-10, "generator {k}: {p} not on the opposite side");
        }
    }
}

#[test]
fn bolza_relation_holds() {
    // γ_0 γ_1⁻¹ γ_2 γ_3⁻¹ γ_0⁻¹ γ_1 γ_2⁻¹ γ_3 = 1 for this generator order.
    let g = build_bolza_group(0.0).unwrap().generators;
    let word = [
        g[0], g[1].inverse(), g[2], g[3].inverse(), g[0].inverse(), g[1], g[2].inverse(), g[3],
    ];
    let product = word.iter().fold(MobiusMap::rotation(0.0), |acc, m| acc.compose(m));
    assert!(product.displacement() < 1e-9, "displacement {}", product.displacement());
}

#[test]
fn mesh_area_converges_to_four_pi() {
    let group = build_bolza_group(10.0).unwrap();
    let mut errs = Vec::new();
    for level in 2..=5 {
        let (mesh, ops) = build_mesh(&group, level).unwrap();
        let area = integrate(&mesh, &vec![1.0; mesh.logical_count()]).unwrap();
        let err = (area - 4.0 * PI).abs() / (4.0 * PI);
        assert!(err <= mesh.area_tolerance(), "level {level}: {err}");
        assert!((ops.mass.iter().sum::<f64>() - area).abs() < 1e-12);
        errs.push(err);
    }
    for w in errs.windows(2) {
        assert!(w[1] < w[0] / 3.0, "{errs:?}");
    }
}

#[test]
fn logical_vertex_counts_follow_euler() {
    let group = build_bolza_group(10.0).unwrap();
    for level in 0..=4u32 {
        let (mesh, _) = build_mesh(&group, level).unwrap();
        let f = mesh.triangles.len() as i64;
        let v = mesh.logical_count() as i64;
        // Closed triangulated surface of genus 2: V − E + F = −2 with E = 3F/2.
        assert_eq!(v - 3 * f / 2 + f, -2, "level {level}");
        assert_eq!(f, 8 * 4i64.pow(level));
    }
}

#[test]
fn first_eigenvalue_is_stable_under_refinement() {
    let group = build_bolza_group(10.0).unwrap();
    let lam: Vec<f64> = [3u32, 4]
        .iter()
        .map(|&l| build_mesh(&group, l).unwrap().1.lowest_nonzero_eigenvalue(1e-12, 2000).unwrap())
        .collect();
    // The Bolza surface has λ₁ ≈ 3.839.
    assert!((lam[1] - 3.839).abs() < 0.05, "{lam:?}");
    assert!((lam[1] - 3.839).abs() < (lam[0] - 3.839).abs());
}
