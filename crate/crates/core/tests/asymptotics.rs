mod common;

use std::f64::consts::PI;

use gclab::asymptotics::{
    blowup_candidates, blowup_mass, diagnose, energy_growth_slope, integral_exp_u, mass_identity_residual,
    monotonicity_report, rho, rho_limit_extrapolate, weak_measure_profile, xi_field, xi_mass, DiagnosticsRecord,
};
use gclab::differentials::{AlphaCoeffs, ClassCoeffs};
use gclab::geometry::{hyperbolic_distance, C64};
use gclab::solver::{log_schedule, SolveConfig, SolveState};
use gclab::GclabError;
use proptest::prelude::*;

fn run(c: &ClassCoeffs, schedule: &[f64]) -> Vec<DiagnosticsRecord> {
    let p = common::lab().problem();
    let run = p.continuation(schedule, c, &SolveConfig::default()).unwrap();
    assert!(run.failures.is_empty());
    run.states.iter().map(|s| diagnose(&p, s, c, None).unwrap()).collect()
}

fn synthetic(t: f64, energy: f64, rho_t: f64, d_t: f64) -> DiagnosticsRecord {
    DiagnosticsRecord {
        t,
        c_mean: None,
        energy,
        d_t,
        s_t: None,
        rho_t,
        mass_residual: 0.0,
        xi_max: None,
        blowup_points: Vec::new(),
        te_u_max: 1.0,
        orth_residuals: Vec::new(),
        kodaira_dist: None,
        int_exp_u: 0.0,
        int_exp_minus_u: 0.0,
        concentration_fraction: 0.0,
        converged: true,
        grad_norm: 0.0,
        blowup_flag: false,
    }
}

#[test]
fn zero_class_family_passes_every_check() {
    let recs = run(&ClassCoeffs::zero(3), &log_schedule(1.0, 1e-3, 10));
    let report = monotonicity_report(&recs).unwrap();
    assert!(report.all_passed(), "{report:?}");
    let area = common::lab().mesh.total_area();
    for r in &recs {
        assert_eq!(r.rho_t, 0.0);
        assert!((r.int_exp_u - area / r.t).abs() < 1e-6 * area / r.t);
        assert!((r.energy - area * (1.0 + r.t.ln())).abs() < 1e-8 * (1.0 + r.energy.abs()));
        assert!(r.s_t.is_none() && r.xi_max.is_none());
    }
    let limit = rho_limit_extrapolate(&recs).unwrap();
    assert_eq!(limit.extrapolated, 0.0);
}

#[test]
fn generic_class_has_monotone_diagnostics() {
    let recs = run(&ClassCoeffs::random(3, 21), &log_schedule(1.0, 1e-2, 9));
    let report = monotonicity_report(&recs).unwrap();
    assert!(report.all_passed(), "{report:?}");
    for w in recs.windows(2) {
        assert!(w[1].rho_t >= w[0].rho_t - 1e-9);
    }
    for r in &recs {
        assert!(r.rho_t > 0.0 && r.rho_t < 4.0 * PI);
        assert!(r.s_t.unwrap() <= r.d_t + 5.0);
    }
}

#[test]
fn discrete_mass_identity_is_exact_at_critical_points() {
    // At a critical point t∫e^u + ρ equals the discrete area, so the residual
    // against 4π is exactly the area error of the mesh.
    let lab = common::lab();
    let p = lab.problem();
    let area_err = (lab.mesh.total_area() - 4.0 * PI).abs();
    for (t, seed) in [(0.8, 1u64), (0.2, 2), (0.02, 3)] {
        let c = ClassCoeffs::random(3, seed);
        let s = p.solve(t, &c, &SolveConfig::default()).unwrap();
        let identity = t * integral_exp_u(&p, &s) + rho(&p, &s);
        assert!((identity - lab.mesh.total_area()).abs() < 1e-7, "t = {t}");
        assert!((mass_identity_residual(&p, &s) - area_err).abs() < 1e-7);
    }
}

#[test]
fn xi_mass_is_twice_rho() {
    let p = common::lab().problem();
    let s = p.solve(0.1, &ClassCoeffs::random(3, 4), &SolveConfig::default()).unwrap();
    let r = rho(&p, &s);
    assert!((xi_mass(&p, &s).unwrap() - 2.0 * r).abs() < 1e-10 * r);
}

fn dipped_state(q: C64, depth: f64) -> SolveState {
    // A bump of −u at q; with α fixed, ξ = −(u − s) peaks there.
    let lab = common::lab();
    let images = lab.basis.group.elements_within(6.0);
    let u: Vec<f64> = lab
        .mesh
        .points
        .iter()
        .map(|&z| {
            let d = gclab::geometry::FuchsianGroup::orbit_distance(&images, z, q);
            -depth * (-(d * d) / 0.1).exp()
        })
        .collect();
    SolveState {
        t: 0.01,
        u,
        a: AlphaCoeffs::random(3, 1),
        converged: true,
        grad_norm: 0.0,
        energy: 0.0,
        iterations: 0,
        blowup_flag: false,
        message: None,
    }
}

#[test]
fn candidates_sit_at_concentration_points() {
    let p = common::lab().problem();
    let q = C64::new(0.3, -0.2);
    let state = dipped_state(q, 20.0);
    let found = blowup_candidates(&p, &state, None).unwrap();
    assert_eq!(found.len(), 1);
    assert!(hyperbolic_distance(found[0], q) < 0.3, "{}", found[0]);
    let profile = weak_measure_profile(&p, &state, &found).unwrap();
    assert!(profile.captured_fraction > 0.5);
    let masses = blowup_mass(&p, &state, found[0], &[0.5, 1.0, 2.0]).unwrap();
    assert!(masses.windows(2).all(|w| w[1].mass >= w[0].mass));
    assert!(!masses[0].resolved && masses[2].resolved);
    let flat = dipped_state(q, 0.0);
    assert!(blowup_candidates(&p, &flat, None).unwrap().is_empty());
}

#[test]
fn xi_requires_a_nonzero_alpha() {
    let p = common::lab().problem();
    let mut state = dipped_state(C64::new(0.0, 0.0), 1.0);
    state.a = AlphaCoeffs(vec![C64::new(0.0, 0.0); 3]);
    assert!(matches!(xi_field(&p, &state), Err(GclabError::Degenerate(_))));
}

#[test]
fn reports_need_enough_ordered_records() {
    let recs: Vec<_> = [1.0, 0.5].iter().map(|&t| synthetic(t, 0.0, 0.0, 0.0)).collect();
    assert!(matches!(monotonicity_report(&recs), Err(GclabError::InsufficientRecords { .. })));
    let unordered: Vec<_> = [0.5, 1.0, 0.2].iter().map(|&t| synthetic(t, 0.0, 0.0, 0.0)).collect();
    assert!(monotonicity_report(&unordered).is_err());
    assert!(rho_limit_extrapolate(&unordered).is_err());
}

#[test]
fn violated_concavity_is_reported() {
    // Convex energies in t fail the concavity check and only that one.
    let recs: Vec<_> = [1.0, 0.75, 0.5, 0.25]
        .iter()
        .map(|&t: &f64| {
            let mut r = synthetic(t, t * t, 0.0, 0.0);
            r.int_exp_u = 2.0 * t;
            r
        })
        .collect();
    let report = monotonicity_report(&recs).unwrap();
    assert!(!report.check("energy_concave").unwrap().passed);
    assert!(report.check("energy_nondecreasing").unwrap().passed);
}

proptest! {
    #[test]
    fn rho_extrapolation_recovers_linear_models(limit in 0.0..20.0f64, slope in -5.0..5.0f64) {
        let recs: Vec<_> = log_schedule(1.0, 1e-3, 8)
            .into_iter()
            .map(|t| synthetic(t, 0.0, limit + slope * t, 0.0))
            .collect();
        let r = rho_limit_extrapolate(&recs).unwrap();
        prop_assert!((r.extrapolated - limit).abs() < 1e-9 * (1.0 + limit));
    }

    #[test]
    fn growth_slope_recovers_linear_models(k in -20.0..20.0f64, b in -5.0..5.0f64) {
        let recs: Vec<_> = (0..6).map(|i| synthetic(1.0 / (i + 1) as f64, k * i as f64 + b, 0.0, i as f64)).collect();
        prop_assert!((energy_growth_slope(&recs).unwrap() - k).abs() < 1e-9 * (1.0 + k.abs()));
    }
}
