mod common;

use std::f64::consts::PI;

use gclab::differentials::kodaira::{
    class_from_point, fubini_study, kodaira_point, orthogonality_residual, q2_basis,
};
use gclab::differentials::poincare::poincare_series_all;
use gclab::differentials::zeros::{locate_zeros_seeded, total_multiplicity};
use gclab::differentials::{differential_dimension, AlphaCoeffs, ClassCoeffs};
use gclab::geometry::{build_bolza_group, C64};
use proptest::prelude::*;

fn domain_point() -> impl Strategy<Value = C64> {
    (0.0..0.8f64, 0.0..2.0 * PI).prop_map(|(r, th)| C64::from_polar(r, th))
}

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn coeffs() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), 3).prop_filter("nonzero", |v| v.iter().any(|z| z.norm() > 1e-3))
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[test]
fn riemann_roch_dimensions() {
    assert_eq!(differential_dimension(2, 2), 3);
    assert_eq!(differential_dimension(3, 2), 5);
    assert_eq!(differential_dimension(4, 3), 14);
}

#[test]
fn basis_is_orthonormal_for_the_wedge_pairing() {
    let b = &common::lab().basis;
    for j in 0..b.nu {
        for k in 0..b.nu {
            let w = b.wedge_pair(&ClassCoeffs::unit(b.nu, j), &AlphaCoeffs(ClassCoeffs::unit(b.nu, k).0));
            let expected = if j == k { 1.0 } else { 0.0 };
            assert!((w - expected).norm() < 1e-10, "({j}, {k}): {w}");
        }
    }
}

#[test]
fn truncation_radius_has_converged() {
    let lo = build_bolza_group(10.0).unwrap();
    let hi = build_bolza_group(12.0).unwrap();
    for z in [C64::new(0.0, 0.0), C64::new(0.3, -0.2), C64::new(-0.5, 0.4)] {
        let a = poincare_series_all(&lo, 2, 8, z);
        let b = poincare_series_all(&hi, 2, 8, z);
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-4 * scale, "{z}: {x} vs {y}");
        }
    }
}

#[test]
fn cubic_differentials_have_six_zeros() {
    let lab = common::Lab::build(3, 3);
    assert_eq!(lab.basis.nu, 5);
    let a = AlphaCoeffs::random(5, 9);
    let zeros = locate_zeros_seeded(&lab.basis, &lab.mesh, &a, 1).unwrap();
    assert_eq!(total_multiplicity(&zeros), 6);
}

#[test]
fn zero_differential_is_rejected() {
    let lab = common::lab();
    assert!(locate_zeros_seeded(&lab.basis, &lab.mesh, &AlphaCoeffs(vec![C64::new(0.0, 0.0); 3]), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wedge_pair_is_sesquilinear(c in coeffs(), a in coeffs(), mu in complex()) {
        let b = &common::lab().basis;
        let (c, a) = (ClassCoeffs(c), AlphaCoeffs(a));
        let w = b.wedge_pair(&c, &a);
        let tol = 1e-9 * (1.0 + w.norm() * mu.norm());
        prop_assert!((b.wedge_pair(&c.scaled(mu), &a) - mu.conj() * w).norm() < tol);
        prop_assert!((b.wedge_pair(&c, &a.scaled(mu)) - mu * w).norm() < tol);
    }

    #[test]
    fn class_functional_matches_pairing_with_unit_differentials(c in coeffs()) {
        let b = &common::lab().basis;
        let c = ClassCoeffs(c);
        let f = b.functional(&c);
        for (k, (fk, ck)) in f.iter().zip(&c.0).enumerate() {
            let unit = AlphaCoeffs(ClassCoeffs::unit(b.nu, k).0);
            prop_assert!((fk - b.wedge_pair(&c, &unit)).norm() < 1e-9);
            prop_assert!((fk - ck.conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn evaluator_is_automorphic(z in domain_point(), word in prop::collection::vec(0usize..8, 1..4)) {
        let b = &common::lab().basis;
        let g = word
            .iter()
            .fold(gclab::geometry::MobiusMap::rotation(0.0), |acc, &k| b.group.generators[k].compose(&acc));
        let hz = b.eval(z).unwrap();
        let hg = b.eval(g.apply(z).unwrap()).unwrap();
        let factor = g.derivative(z).unwrap().powu(2);
        let scale = hz.iter().map(|v| v.norm()).fold(1e-3, f64::max);
        for (x, y) in hg.iter().zip(&hz) {
            prop_assert!((x * factor - y).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn quadratic_basis_is_even(z in domain_point()) {
        let b = &common::lab().basis;
        let h = b.eval(z).unwrap();
        let hm = b.eval(-z).unwrap();
        let scale = h.iter().map(|v| v.norm()).fold(1e-3, f64::max);
        for (x, y) in h.iter().zip(&hm) {
            prop_assert!((x - y).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn fubini_study_is_projective(x in coeffs(), y in coeffs(), mu in complex()) {
        prop_assume!(mu.norm() > 1e-2);
        let d = fubini_study(&x, &y);
        prop_assert!((0.0..=PI / 2.0 + 1e-12).contains(&d));
        prop_assert!((d - fubini_study(&y, &x)).abs() < 1e-9);
        let xs: Vec<C64> = x.iter().map(|v| v * mu).collect();
        prop_assert!((d - fubini_study(&xs, &y)).abs() < 1e-9);
        prop_assert!(fubini_study(&x, &xs) < 1e-7);
    }

    #[test]
    fn point_class_lies_on_the_kodaira_curve(q in domain_point()) {
        let b = &common::lab().basis;
        let c = class_from_point(b, q).unwrap();
        prop_assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
        let k = kodaira_point(b, q).unwrap();
        prop_assert!(fubini_study(&b.functional(&c), &k) < 1e-7);
        prop_assert!(orthogonality_residual(b, &c, q).unwrap() < 1e-8);
    }

    #[test]
    fn q2_basis_vanishes_at_the_point(q in domain_point()) {
        let b = &common::lab().basis;
        let h = b.eval(q).unwrap();
        let scale = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let q2 = q2_basis(b, q).unwrap();
        prop_assert_eq!(q2.len(), b.nu - 1);
        for (i, a) in q2.iter().enumerate() {
            prop_assert!(dot(&h, &a.0).norm() < 1e-10 * scale);
            for (j, a2) in q2.iter().enumerate() {
                let ip: C64 = a.0.iter().zip(&a2.0).map(|(x, y)| x.conj() * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - expected).norm() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn zero_divisor_has_degree_four_and_is_symmetric(seed in any::<u64>()) {
        let lab = common::lab();
        let a = AlphaCoeffs::random(3, seed);
        let zeros = locate_zeros_seeded(&lab.basis, &lab.mesh, &a, seed ^ 0x55).unwrap();
        prop_assert_eq!(total_multiplicity(&zeros), 4);
        let scale = a.0.iter().map(|v| v.norm()).sum::<f64>();
        for z in &zeros {
            let v = dot(&lab.basis.eval(z.z).unwrap(), &a.0);
            prop_assert!(v.norm() < 1e-6 * scale, "|alpha({})| = {}", z.z, v.norm());
            let partner = lab.basis.group.reduce_to_domain(-z.z).unwrap().0;
            let images = lab.basis.group.elements_within(6.0);
            let paired = zeros
                .iter()
                .any(|w| gclab::geometry::FuchsianGroup::orbit_distance(&images, partner, w.z) < 1e-5);
            prop_assert!(paired, "zero {} has no partner at -z", z.z);
        }
    }
}
