//! Diagnostics of minimizers along `t → 0⁺`: conserved mass, `ρ_t`, `s_t`,
//! `ξ_t`, blow-up candidates and masses, and weak-limit profiles.

mod report;

pub use report::{
    energy_growth_slope, monotonicity_report, rho_limit_extrapolate, CheckResult, MonotonicityReport,
    RhoLimit,
};

use serde::{Deserialize, Serialize};

use crate::differentials::kodaira::{orthogonality_residual, KodairaSampler};
use crate::differentials::ClassCoeffs;
use crate::error::{GclabError, Result};
use crate::geometry::group::circumradius;
use crate::geometry::{gauss_bonnet_area, hyperbolic_distance, FuchsianGroup, MobiusMap, C64, GENUS};
use crate::solver::{Donaldson, SolveState};

/// Candidates are merged within this hyperbolic radius.
pub const CANDIDATE_MERGE_RADIUS: f64 = 0.2;
/// Default threshold above the median of `ξ`.
pub const CANDIDATE_OFFSET: f64 = 10.0;
/// Radius of the balls used for the concentration fraction.
pub const CONCENTRATION_RADIUS: f64 = 0.1;

fn km1(p: &Donaldson) -> f64 {
    p.kappa() as f64 - 1.0
}

/// `e^{−(κ−1)u_i} |α(z_i)|²_fiber` per vertex.
fn inner_density(p: &Donaldson, state: &SolveState) -> Vec<f64> {
    let k = km1(p);
    p.basis
        .alpha_fiber(&state.a)
        .iter()
        .zip(&state.u)
        .map(|(f, u)| f.norm_sqr() * (-k * u).exp())
        .collect()
}

fn integrate(p: &Donaldson, f: impl IntoIterator<Item = f64>) -> f64 {
    f.into_iter().zip(p.mass()).map(|(x, m)| x * m).sum()
}

/// `∫ e^u dA`.
pub fn integral_exp_u(p: &Donaldson, state: &SolveState) -> f64 {
    integrate(p, state.u.iter().map(|u| u.exp()))
}

/// `ρ_t = 4(κ−1) ∫ e^{−(κ−1)u} ‖α‖² dA`.
pub fn rho(p: &Donaldson, state: &SolveState) -> f64 {
    4.0 * km1(p) * integrate(p, inner_density(p, state))
}

/// `|t∫e^u + ρ_t − 4π(g−1)|`.
pub fn mass_identity_residual(p: &Donaldson, state: &SolveState) -> f64 {
    (state.t * integral_exp_u(p, state) + rho(p, state) - gauss_bonnet_area(GENUS)).abs()
}

/// Mean value `d_t = ⨍ u dA`.
pub fn mean_u(p: &Donaldson, state: &SolveState) -> f64 {
    integrate(p, state.u.iter().copied()) / p.area()
}

/// `s_t = ln(Σ|a_j|²)/(κ−1)`.
pub fn log_norm_s(p: &Donaldson, state: &SolveState) -> Result<f64> {
    let n = state.a.norm_sqr();
    if !(n > 0.0) {
        return Err(GclabError::Degenerate("α vanishes, s_t is undefined"));
    }
    Ok(n.ln() / km1(p))
}

/// `ξ = −(κ−1)(u − s_t)` per vertex.
pub fn xi_field(p: &Donaldson, state: &SolveState) -> Result<Vec<f64>> {
    let s = log_norm_s(p, state)?;
    let k = km1(p);
    Ok(state.u.iter().map(|u| -k * (u - s)).collect())
}

/// `∫ 8 ‖α̂‖² e^ξ dA` with `α̂ = α/‖α‖`; equals `2ρ_t/(κ−1)`.
pub fn xi_mass(p: &Donaldson, state: &SolveState) -> Result<f64> {
    let xi = xi_field(p, state)?;
    let n = state.a.norm_sqr();
    let fiber = p.basis.alpha_fiber(&state.a);
    Ok(8.0 * integrate(p, fiber.iter().zip(&xi).map(|(f, x)| f.norm_sqr() / n * x.exp())))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Group elements moving a domain point at most to a neighbouring tile.
fn neighbour_images(group: &FuchsianGroup) -> Vec<MobiusMap> {
    group.elements_within(2.0 * circumradius() + 0.5)
}

/// Local maxima of `ξ` above `threshold` (default `median(ξ) + 10`), merged
/// within hyperbolic radius 0.2 on the surface. Strongest first.
pub fn blowup_candidates(p: &Donaldson, state: &SolveState, threshold: Option<f64>) -> Result<Vec<C64>> {
    let xi = xi_field(p, state)?;
    let level = threshold.unwrap_or_else(|| median(&xi) + CANDIDATE_OFFSET);
    let adjacency = p.mesh.adjacency();
    let mut peaks: Vec<usize> = (0..xi.len())
        .filter(|&i| xi[i] > level && adjacency[i].iter().all(|&j| xi[j] <= xi[i]))
        .collect();
    peaks.sort_by(|&i, &j| xi[j].total_cmp(&xi[i]).then(i.cmp(&j)));
    let images = neighbour_images(&p.basis.group);
    let mut out: Vec<C64> = Vec::new();
    for i in peaks {
        let z = p.mesh.points[i];
        if out
            .iter()
            .all(|&q| FuchsianGroup::orbit_distance(&images, q, z) > CANDIDATE_MERGE_RADIUS)
        {
            out.push(z);
        }
    }
    Ok(out)
}

/// Hyperbolic distance on the surface between vertex points and `q`.
fn surface_distances(p: &Donaldson, q: C64) -> Result<Vec<f64>> {
    let (q0, _) = p.basis.group.reduce_to_domain(q)?;
    let images = neighbour_images(&p.basis.group);
    Ok(p.mesh
        .points
        .iter()
        .map(|&z| FuchsianGroup::orbit_distance(&images, z, q0))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMass {
    pub radius: f64,
    pub mass: f64,
    /// Whether the radius spans at least three mesh edges.
    pub resolved: bool,
}

/// `8 ∫_{B_r(q)} e^{−u}‖α‖² dA` for each radius (κ = 2).
pub fn blowup_mass(p: &Donaldson, state: &SolveState, q: C64, radii: &[f64]) -> Result<Vec<BallMass>> {
    if p.kappa() != 2 {
        return Err(GclabError::KappaUnsupported {
            required: 2,
            found: p.kappa(),
        });
    }
    let density = inner_density(p, state);
    let dist = surface_distances(p, q)?;
    let edge = p.mesh.max_edge_length();
    Ok(radii
        .iter()
        .map(|&r| {
            let mass = 8.0
                * dist
                    .iter()
                    .zip(&density)
                    .zip(p.mass())
                    .filter(|((d, _), _)| **d <= r)
                    .map(|((_, f), m)| f * m)
                    .sum::<f64>();
            if r < 3.0 * edge {
                log::warn!("blow-up mass radius {r} is below three mesh edges ({edge:.3})");
            }
            BallMass {
                radius: r,
                mass,
                resolved: r >= 3.0 * edge,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakProfile {
    /// `M_i e^{−u_i}` per vertex.
    pub masses: Vec<f64>,
    pub total: f64,
    /// Share of the total within hyperbolic radius 0.1 of the candidates.
    pub captured_fraction: f64,
}

/// Per-vertex masses of `e^{−u} dA` and their concentration near `candidates`.
pub fn weak_measure_profile(p: &Donaldson, state: &SolveState, candidates: &[C64]) -> Result<WeakProfile> {
    let masses: Vec<f64> = state
        .u
        .iter()
        .zip(p.mass())
        .map(|(u, m)| m * (-u).exp())
        .collect();
    let total: f64 = masses.iter().sum();
    let mut inside = vec![false; masses.len()];
    for &q in candidates {
        for (flag, d) in inside.iter_mut().zip(surface_distances(p, q)?) {
            *flag |= d <= CONCENTRATION_RADIUS;
        }
    }
    let captured = masses
        .iter()
        .zip(&inside)
        .filter(|(_, f)| **f)
        .fold(0.0, |acc, (m, _)| acc + m);
    Ok(WeakProfile {
        captured_fraction: if total > 0.0 { captured / total } else { 0.0 },
        masses,
        total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupPoint {
    pub point: C64,
    /// Blow-up mass at the smallest resolved radius.
    pub sigma: f64,
    pub radius: f64,
    /// `‖α̂‖²_fiber` at the vertex nearest the point.
    pub alpha_hat_sqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Mean curvature `√(1 − t)`, defined for `t ≤ 1`.
    pub c_mean: Option<f64>,
    pub energy: f64,
    pub d_t: f64,
    pub s_t: Option<f64>,
    pub rho_t: f64,
    pub mass_residual: f64,
    pub xi_max: Option<f64>,
    pub blowup_points: Vec<BlowupPoint>,
    pub te_u_max: f64,
    pub orth_residuals: Vec<f64>,
    pub kodaira_dist: Option<f64>,
    pub int_exp_u: f64,
    pub int_exp_minus_u: f64,
    pub concentration_fraction: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub blowup_flag: bool,
}

/// Every diagnostic of one state. `kodaira_dist` is passed in since it
/// depends only on the class.
pub fn diagnose(
    p: &Donaldson,
    state: &SolveState,
    c: &ClassCoeffs,
    kodaira_dist: Option<f64>,
) -> Result<DiagnosticsRecord> {
    let rho_t = rho(p, state);
    let ie = integral_exp_u(p, state);
    let has_alpha = state.a.norm_sqr() > 0.0;
    let s_t = if has_alpha { Some(log_norm_s(p, state)?) } else { None };
    let xi_max = if has_alpha {
        Some(xi_field(p, state)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    } else {
        None
    };
    let candidates = if has_alpha { blowup_candidates(p, state, None)? } else { Vec::new() };
    let edge = p.mesh.max_edge_length();
    let mut blowup_points = Vec::new();
    let mut orth_residuals = Vec::new();
    let fiber = p.basis.alpha_fiber(&state.a);
    for &q in &candidates {
        let radius = 3.0 * edge;
        let sigma = if p.kappa() == 2 {
            blowup_mass(p, state, q, &[radius])?[0].mass
        } else {
            f64::NAN
        };
        let nearest = p
            .mesh
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| hyperbolic_distance(*a.1, q).total_cmp(&hyperbolic_distance(*b.1, q)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        blowup_points.push(BlowupPoint {
            point: q,
            sigma,
            radius,
            alpha_hat_sqr: fiber[nearest].norm_sqr() / state.a.norm_sqr(),
        });
        if p.kappa() == 2 && !c.is_zero() {
            orth_residuals.push(orthogonality_residual(p.basis, c, q)?);
        }
    }
    let profile = weak_measure_profile(p, state, &candidates)?;
    Ok(DiagnosticsRecord {
        t: state.t,
        c_mean: (state.t <= 1.0).then(|| (1.0 - state.t).sqrt()),
        energy: state.energy,
        d_t: mean_u(p, state),
        s_t,
        rho_t,
        mass_residual: (state.t * ie + rho_t - gauss_bonnet_area(GENUS)).abs(),
        xi_max,
        blowup_points,
        te_u_max: state.u.iter().map(|u| state.t * u.exp()).fold(0.0, f64::max),
        orth_residuals,
        kodaira_dist,
        int_exp_u: ie,
        int_exp_minus_u: profile.total,
        concentration_fraction: profile.captured_fraction,
        converged: state.converged,
        grad_norm: state.grad_norm,
        blowup_flag: state.blowup_flag,
    })
}

/// Kodaira-curve distance of a class, `None` for the zero class or κ ≠ 2.
pub fn class_kodaira_distance(sampler: Option<&KodairaSampler>, c: &ClassCoeffs) -> Result<Option<f64>> {
    match sampler {
        Some(s) if !c.is_zero() => Ok(Some(s.distance(c)?.distance)),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
