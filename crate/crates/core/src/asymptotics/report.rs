//! Structural checks over a run: monotonicity and concavity in `t`, and the
//! small-`t` limit of `ρ_t`.

use serde::{Deserialize, Serialize};

use super::DiagnosticsRecord;
use crate::error::{GclabError, Result};

/// Relative tolerance of the finite-difference `dc/dt ≈ ∫e^u` check.
pub const SLOPE_TOLERANCE: f64 = 0.05;
pub const CONCAVITY_TOLERANCE: f64 = 1e-6;
pub const RHO_TOLERANCE: f64 = 1e-6;
pub const TE_U_TOLERANCE: f64 = 1e-3;
const ORDER_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation found; nonpositive when the check passes strictly.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub checks: Vec<CheckResult>,
}

impl MonotonicityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, margins: impl IntoIterator<Item = f64>) -> CheckResult {
    let worst = margins.into_iter().fold(f64::NEG_INFINITY, f64::max);
    CheckResult {
        name: name.to_string(),
        passed: worst <= 0.0,
        worst_margin: worst,
    }
}

/// Checks, over records sorted by decreasing `t`:
/// `t∫e^u` and `c_t` nondecreasing in `t`, `c_t` concave, `ρ_t`
/// nonincreasing, `dc/dt ≈ ∫e^u` and `te^u ≤ 1` pointwise.
pub fn monotonicity_report(records: &[DiagnosticsRecord]) -> Result<MonotonicityReport> {
    if records.len() < 3 {
        return Err(GclabError::InsufficientRecords {
            need: 3,
            got: records.len(),
        });
    }
    if records.windows(2).any(|w| w[1].t >= w[0].t) {
        return Err(GclabError::InvalidArgument("records must be sorted by decreasing t".into()));
    }
    let pairs = || records.windows(2);

    let mass = check(
        "t_int_exp_u_nondecreasing",
        pairs().map(|w| {
            let (hi, lo) = (w[0].t * w[0].int_exp_u, w[1].t * w[1].int_exp_u);
            lo - hi - ORDER_SLACK * hi.abs().max(1.0)
        }),
    );
    let energy = check(
        "energy_nondecreasing",
        pairs().map(|w| w[1].energy - w[0].energy - ORDER_SLACK * w[0].energy.abs().max(1.0)),
    );
    let slopes: Vec<f64> = pairs()
        .map(|w| (w[0].energy - w[1].energy) / (w[0].t - w[1].t))
        .collect();
    let concavity = check(
        "energy_concave",
        slopes.windows(2).map(|s| {
            // s[0] sits at larger t than s[1]
            s[0] - s[1] - CONCAVITY_TOLERANCE * s[0].abs().max(s[1].abs())
        }),
    );
    let rho = check(
        "rho_nonincreasing",
        pairs().map(|w| w[0].rho_t - w[1].rho_t - RHO_TOLERANCE),
    );
    let derivative = check(
        "energy_slope_matches_int_exp_u",
        pairs().zip(&slopes).map(|(w, s)| {
            let reference = (w[0].int_exp_u * w[1].int_exp_u).sqrt();
            (s - reference).abs() / reference - SLOPE_TOLERANCE
        }),
    );
    let bound = check(
        "te_u_at_most_one",
        records.iter().map(|r| r.te_u_max - 1.0 - TE_U_TOLERANCE),
    );
    Ok(MonotonicityReport {
        checks: vec![mass, energy, concavity, rho, derivative, bound],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoLimit {
    pub supremum: f64,
    pub extrapolated: f64,
    pub model: String,
}

/// Supremum of `ρ_t` and its linear-in-`t` extrapolation to `t = 0` over the
/// four smallest `t`.
pub fn rho_limit_extrapolate(records: &[DiagnosticsRecord]) -> Result<RhoLimit> {
    let mut sorted: Vec<&DiagnosticsRecord> = records.iter().filter(|r| r.converged).collect();
    if sorted.len() < 4 {
        return Err(GclabError::InsufficientRecords {
            need: 4,
            got: sorted.len(),
        });
    }
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let tail = &sorted[..4];
    let n = tail.len() as f64;
    let mt = tail.iter().map(|r| r.t).sum::<f64>() / n;
    let mr = tail.iter().map(|r| r.rho_t).sum::<f64>() / n;
    let stt: f64 = tail.iter().map(|r| (r.t - mt).powi(2)).sum();
    let str_: f64 = tail.iter().map(|r| (r.t - mt) * (r.rho_t - mr)).sum();
    let slope = if stt > 0.0 { str_ / stt } else { 0.0 };
    Ok(RhoLimit {
        supremum: sorted.iter().map(|r| r.rho_t).fold(f64::NEG_INFINITY, f64::max),
        extrapolated: mr - slope * mt,
        model: "least-squares line in t through the four smallest t".into(),
    })
}

/// Least-squares slope of energy against `d_t` over the given records.
pub fn energy_growth_slope(records: &[DiagnosticsRecord]) -> Option<f64> {
    if records.len() < 2 {
        return None;
    }
    let n = records.len() as f64;
    let md = records.iter().map(|r| r.d_t).sum::<f64>() / n;
    let me = records.iter().map(|r| r.energy).sum::<f64>() / n;
    let sdd: f64 = records.iter().map(|r| (r.d_t - md).powi(2)).sum();
    let sde: f64 = records.iter().map(|r| (r.d_t - md) * (r.energy - me)).sum();
    (sdd > 0.0).then(|| sde / sdd)
}
