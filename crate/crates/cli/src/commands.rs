//! Subcommand bodies. Each writes its files into the configured output
//! directory and returns a one-line JSON summary for stdout.

use std::time::{SystemTime, UNIX_EPOCH};

use gclab::asymptotics::{
    blowup_candidates, blowup_mass, class_kodaira_distance, diagnose, energy_growth_slope, monotonicity_report,
    rho_limit_extrapolate, weak_measure_profile, DiagnosticsRecord, MonotonicityReport, RhoLimit,
};
use gclab::differentials::kodaira::{class_from_point, domain_samples, fubini_study, normalize_projective};
use gclab::differentials::zeros::{locate_zeros_seeded, total_multiplicity};
use gclab::differentials::{AlphaCoeffs, ClassCoeffs, DifferentialBasis, KodairaSampler};
use gclab::geometry::{gauss_bonnet_area, C64, GENUS};
use gclab::solver::{Continuation, Donaldson, SolveState};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ClassSpec, ExperimentConfig};
use crate::error::CliError;
use crate::output::{curve_rows, field_rows, write_plots, OutputDir, CURVE_COLUMNS, FIELD_COLUMNS};
use crate::setup::prepare;

pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.json";
const AUTOMORPHY_POINTS: usize = 200;
const SEAM_POINTS: usize = 64;

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn header(command: &str, cfg: &ExperimentConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("timestamp".into(), json!(timestamp()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config".into(), json!(cfg));
    m
}

#[derive(Serialize)]
struct ClassEcho<'a> {
    spec: &'a str,
    coefficients: &'a [C64],
}

/// Solver outcome without the per-vertex field (that goes to CSV).
#[derive(Serialize)]
struct StateSummary<'a> {
    t: f64,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    energy: f64,
    blowup_flag: bool,
    message: &'a Option<String>,
    a: &'a AlphaCoeffs,
    oscillation: f64,
}

impl<'a> From<&'a SolveState> for StateSummary<'a> {
    fn from(s: &'a SolveState) -> Self {
        Self {
            t: s.t,
            converged: s.converged,
            iterations: s.iterations,
            grad_norm: s.grad_norm,
            energy: s.energy,
            blowup_flag: s.blowup_flag,
            message: &s.message,
            a: &s.a,
            oscillation: s.oscillation(),
        }
    }
}

fn class_kodaira(cfg: &ExperimentConfig, basis: &DifferentialBasis, c: &ClassCoeffs) -> Result<Option<f64>, CliError> {
    if cfg.kappa != 2 || c.is_zero() {
        return Ok(None);
    }
    let sampler = KodairaSampler::new(basis, cfg.kodaira_samples)?;
    Ok(class_kodaira_distance(Some(&sampler), c)?)
}

pub fn mesh(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let setup = prepare(cfg, false)?;
    let (m, ops) = (&setup.mesh, &setup.ops);
    let area = m.total_area();
    let exact = gauss_bonnet_area(GENUS);
    let row_sum_max = ops
        .stiffness
        .outer_iterator()
        .map(|row| row.iter().map(|(_, v)| v).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let summary = json!({
        "level": m.level,
        "raw_vertices": m.vertices.len(),
        "triangles": m.triangles.len(),
        "logical_vertices": m.logical_count(),
        "area": area,
        "exact_area": exact,
        "area_relative_error": (area - exact).abs() / exact,
        "area_tolerance": m.area_tolerance(),
        "max_edge_length": m.max_edge_length(),
        "stiffness_row_sum_max": row_sum_max,
        "lowest_nonzero_eigenvalue": ops.lowest_nonzero_eigenvalue(1e-10, 500)?,
        "cache_hit": setup.cache_hit,
    });
    let mut doc = header("mesh", cfg);
    doc.insert("mesh".into(), summary.clone());
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(RESULTS_FILE, &doc)?;
    Ok(summary)
}

pub fn basis(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let setup = prepare(cfg, true)?;
    let b = setup.basis();
    let gram = b.gram();
    let gram_dev = deviation_from_identity(&gram);
    let bary_dev = deviation_from_identity(&b.gram_barycentric(&setup.mesh)?);
    let automorphy = b.automorphy_residual(&domain_samples(b, AUTOMORPHY_POINTS))?;
    let a = AlphaCoeffs::random(b.nu, cfg.seed);
    let zeros = locate_zeros_seeded(b, &setup.mesh, &a, cfg.seed)?;
    let summary = json!({
        "kappa": b.kappa,
        "nu": b.nu,
        "power_count": b.power_count,
        "r_cut": b.r_cut,
        "ball_elements": setup.group.ball_elements.len(),
        "gram_deviation": gram_dev,
        "gram_barycentric_deviation": bary_dev,
        "automorphy_residual": automorphy,
        "seam_residual": b.seam_residual(SEAM_POINTS),
        "zero_multiplicity": total_multiplicity(&zeros),
        "expected_zero_multiplicity": 2 * b.kappa * (GENUS - 1),
        "cache_hit": setup.cache_hit,
    });
    let mut doc = header("basis", cfg);
    doc.insert("basis".into(), summary.clone());
    doc.insert("zeros".into(), json!(zeros));
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(RESULTS_FILE, &doc)?;
    Ok(summary)
}

fn deviation_from_identity(g: &gclab::differentials::basis::GramMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

fn resolve_class(cfg: &ExperimentConfig, basis: &DifferentialBasis) -> Result<ClassCoeffs, CliError> {
    ClassSpec::parse(&cfg.class)?.resolve(basis, cfg.seed)
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let setup = prepare(cfg, true)?;
    let p = Donaldson::new(setup.basis(), &setup.mesh, &setup.ops);
    let c = resolve_class(cfg, setup.basis())?;
    let state = p.solve(cfg.t, &c, &cfg.solver)?;
    let kd = class_kodaira(cfg, setup.basis(), &c)?;
    let record = diagnose(&p, &state, &c, kd)?;
    let reference = (1.0 / cfg.t).ln();
    let max_dev = state.u.iter().map(|u| (u - reference).abs()).fold(0.0, f64::max);
    let summary = json!({
        "t": state.t,
        "converged": state.converged,
        "energy": state.energy,
        "el_residual": p.state_residual(&state, &c)?,
        "max_abs_u_minus_ln_inv_t": max_dev,
    });
    let mut doc = header("solve", cfg);
    doc.insert("class".into(), json!(ClassEcho { spec: &cfg.class, coefficients: &c.0 }));
    doc.insert("state".into(), json!(StateSummary::from(&state)));
    doc.insert("summary".into(), summary.clone());
    doc.insert("records".into(), json!([record]));
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv("fields_t0.csv", &FIELD_COLUMNS, &field_rows(&p, &state)?)?;
    out.write_csv("curves.csv", &CURVE_COLUMNS, &curve_rows(std::slice::from_ref(&record)))?;
    out.write_json(RESULTS_FILE, &doc)?;
    if !state.converged {
        return Err(CliError::Numerical(format!(
            "solve at t = {} did not converge: {}",
            state.t,
            state.message.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(summary)
}

struct Arm {
    run: Continuation,
    records: Vec<DiagnosticsRecord>,
}

fn run_arm(p: &Donaldson, cfg: &ExperimentConfig, c: &ClassCoeffs) -> Result<Arm, CliError> {
    let run = p.continuation(&cfg.t_schedule, c, &cfg.solver)?;
    let kd = class_kodaira(cfg, p.basis, c)?;
    let records = run
        .states
        .iter()
        .map(|s| diagnose(p, s, c, kd))
        .collect::<gclab::Result<Vec<_>>>()?;
    Ok(Arm { run, records })
}

fn arm_failure(arm: &Arm) -> Option<String> {
    let stalled: Vec<String> = arm
        .run
        .states
        .iter()
        .filter(|s| !s.converged)
        .map(|s| format!("{:e}", s.t))
        .collect();
    if arm.run.failures.is_empty() && stalled.is_empty() {
        return None;
    }
    Some(format!(
        "{} solve error(s), no convergence at t = [{}]",
        arm.run.failures.len(),
        stalled.join(", ")
    ))
}

fn write_arm(out: &mut OutputDir, p: &Donaldson, arm: &Arm, suffix: &str, cfg: &ExperimentConfig) -> Result<(), CliError> {
    for (idx, state) in arm.run.states.iter().enumerate() {
        out.write_csv(&format!("fields{suffix}_t{idx}.csv"), &FIELD_COLUMNS, &field_rows(p, state)?)?;
    }
    out.write_csv(&format!("curves{suffix}.csv"), &CURVE_COLUMNS, &curve_rows(&arm.records))?;
    if cfg.plots {
        write_plots(out, &arm.records, suffix)?;
    }
    Ok(())
}

fn arm_json(arm: &Arm) -> Value {
    let states: Vec<StateSummary> = arm.run.states.iter().map(StateSummary::from).collect();
    json!({
        "states": states,
        "records": arm.records,
        "failures": arm.run.failures,
        "blowup_at": arm.run.blowup_at,
    })
}

pub fn continuation(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let setup = prepare(cfg, true)?;
    let p = Donaldson::new(setup.basis(), &setup.mesh, &setup.ops);
    let c = resolve_class(cfg, setup.basis())?;
    let arm = run_arm(&p, cfg, &c)?;
    let mut doc = header("continuation", cfg);
    doc.insert("class".into(), json!(ClassEcho { spec: &cfg.class, coefficients: &c.0 }));
    if let Value::Object(m) = arm_json(&arm) {
        doc.extend(m);
    }
    let mut out = OutputDir::create(&cfg.output_dir)?;
    write_arm(&mut out, &p, &arm, "", cfg)?;
    out.write_json(RESULTS_FILE, &doc)?;
    if let Some(msg) = arm_failure(&arm) {
        return Err(CliError::Numerical(msg));
    }
    Ok(json!({
        "states": arm.run.states.len(),
        "blowup_at": arm.run.blowup_at,
        "final_energy": arm.records.last().map(|r| r.energy),
        "final_rho": arm.records.last().map(|r| r.rho_t),
    }))
}

pub fn kodaira_scan(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    if cfg.kappa != 2 {
        return Err(CliError::Config(format!("kodaira-scan needs kappa = 2, got {}", cfg.kappa)));
    }
    let setup = prepare(cfg, true)?;
    let b = setup.basis();
    let c = resolve_class(cfg, b)?;
    if c.is_zero() {
        return Err(CliError::Config("the zero class has no Kodaira image".into()));
    }
    let sampler = KodairaSampler::new(b, cfg.kodaira_samples)?;
    let hit = sampler.distance(&c)?;
    let fhat = normalize_projective(&b.functional(&c))?;
    let rows: Vec<Vec<String>> = sampler
        .points
        .iter()
        .zip(sampler.curve())
        .enumerate()
        .map(|(i, (z, k))| {
            let mut row = vec![i.to_string(), crate::output::num(z.re), crate::output::num(z.im)];
            for v in k {
                row.push(crate::output::num(v.re));
                row.push(crate::output::num(v.im));
            }
            row.push(crate::output::num(fubini_study(&fhat, k)));
            row
        })
        .collect();
    let mut header_row: Vec<String> = vec!["sample".into(), "x".into(), "y".into()];
    for j in 1..=b.nu {
        header_row.push(format!("k{j}_re"));
        header_row.push(format!("k{j}_im"));
    }
    header_row.push("fs_to_class".into());
    let header_refs: Vec<&str> = header_row.iter().map(String::as_str).collect();
    let summary = json!({
        "distance": hit.distance,
        "argmin": hit.argmin,
        "resolution": sampler.resolution(),
        "spacing": sampler.spacing,
        "max_speed": sampler.max_speed,
        "samples": sampler.points.len(),
    });
    let mut doc = header("kodaira-scan", cfg);
    doc.insert("class".into(), json!(ClassEcho { spec: &cfg.class, coefficients: &c.0 }));
    doc.insert("kodaira".into(), summary.clone());
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv("kodaira_curve.csv", &header_refs, &rows)?;
    out.write_json(RESULTS_FILE, &doc)?;
    Ok(summary)
}

/// Largest number of blow-up points the theory allows for genus 2.
const MAX_BLOWUP_POINTS: usize = GENUS as usize - 1;
/// Sanity bound on how far `c_t` may fall below its value at the largest `t`.
const ENERGY_DROP_BOUND: f64 = 1e3;

fn probe_report(p: &Donaldson, arm: &Arm) -> Result<Value, CliError> {
    let Some((state, record)) = arm.run.states.last().zip(arm.records.last()) else {
        return Ok(json!({ "flagged": false, "states": 0 }));
    };
    let edge = p.mesh.max_edge_length();
    // The strongest local maximum of ξ stands in when nothing clears the
    // candidate threshold, so σ and the concentration are always reported.
    let peak = if state.a.norm_sqr() > 0.0 {
        blowup_candidates(p, state, Some(f64::NEG_INFINITY))?.first().copied()
    } else {
        None
    };
    let (sigma, peak_concentration) = match peak {
        Some(q) if p.kappa() == 2 => {
            let radii = [3.0 * edge, 4.5 * edge, 6.0 * edge];
            let profile = weak_measure_profile(p, state, &[q])?;
            (Some(blowup_mass(p, state, q, &radii)?), Some(profile.captured_fraction))
        }
        _ => (None, None),
    };
    let s_minus_d: Vec<Option<f64>> = arm.records.iter().map(|r| r.s_t.map(|s| s - r.d_t)).collect();
    let bound_c = s_minus_d.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let energies: Vec<f64> = arm.records.iter().map(|r| r.energy).collect();
    let min_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let m = record.blowup_points.len();
    Ok(json!({
        "flagged": arm.run.blowup_at.is_some(),
        "blowup_at": arm.run.blowup_at,
        "final_t": state.t,
        "final_oscillation": state.oscillation(),
        "candidate_count": m,
        "candidate_bound": MAX_BLOWUP_POINTS,
        "candidate_count_within_bound": m <= MAX_BLOWUP_POINTS,
        "candidates": record.blowup_points,
        "peak": peak,
        "peak_xi": peak.map(|_| record.xi_max),
        "sigma_estimates": sigma,
        "sigma_reference": 8.0 * std::f64::consts::PI,
        "concentration_fraction": record.concentration_fraction,
        "peak_concentration_fraction": peak_concentration,
        "s_minus_d_trace": s_minus_d,
        "s_minus_d_bound": bound_c.is_finite().then_some(bound_c),
        "energy_trace": energies,
        "energy_min": min_energy,
        "energy_bounded_below": min_energy >= energies[0] - ENERGY_DROP_BOUND,
        "energy_growth_slope": energy_growth_slope(&arm.records),
        "energy_growth_reference": -4.0 * std::f64::consts::PI * (GENUS as f64 - 1.0 - m as f64),
    }))
}

pub fn blowup_probe(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let setup = prepare(cfg, true)?;
    let b = setup.basis();
    let p = Donaldson::new(b, &setup.mesh, &setup.ops);
    let q = C64::new(cfg.probe_point[0], cfg.probe_point[1]);
    if q.norm() >= 1.0 {
        return Err(CliError::Config(format!("probe_point {q} outside the unit disk")));
    }
    let point_class = class_from_point(b, q)?;
    let random_class = ClassCoeffs::random(b.nu, cfg.probe_seed);
    let (point_arm, random_arm) = std::thread::scope(|s| {
        let h = s.spawn(|| run_arm(&p, cfg, &point_class));
        let r = run_arm(&p, cfg, &random_class);
        (h.join().expect("probe arm panicked"), r)
    });
    let (point_arm, random_arm) = (point_arm?, random_arm?);
    let mut arms = serde_json::Map::new();
    for (name, arm, c, spec) in [
        ("point", &point_arm, &point_class, format!("point:{},{}", q.re, q.im)),
        ("random", &random_arm, &random_class, format!("random:{}", cfg.probe_seed)),
    ] {
        let mut v = arm_json(arm);
        v["class"] = json!(ClassEcho { spec: &spec, coefficients: &c.0 });
        v["report"] = probe_report(&p, arm)?;
        arms.insert(name.into(), v);
    }
    let mut doc = header("blowup-probe", cfg);
    doc.insert("arms".into(), Value::Object(arms.clone()));
    let mut out = OutputDir::create(&cfg.output_dir)?;
    write_arm(&mut out, &p, &point_arm, "_point", cfg)?;
    write_arm(&mut out, &p, &random_arm, "_random", cfg)?;
    out.write_json(RESULTS_FILE, &doc)?;
    let failures: Vec<String> = [("point", &point_arm), ("random", &random_arm)]
        .into_iter()
        .filter_map(|(n, a)| arm_failure(a).map(|m| format!("{n} arm: {m}")))
        .collect();
    if !failures.is_empty() {
        return Err(CliError::Numerical(failures.join("; ")));
    }
    Ok(json!({
        "point": arms["point"]["report"]["candidate_count"],
        "random": arms["random"]["report"]["candidate_count"],
    }))
}

/// Records as stored by `solve`, `continuation` or `blowup-probe`.
#[derive(Deserialize)]
struct StoredResults {
    #[serde(default)]
    records: Vec<DiagnosticsRecord>,
    #[serde(default)]
    arms: std::collections::BTreeMap<String, StoredArm>,
}

#[derive(Deserialize)]
struct StoredArm {
    records: Vec<DiagnosticsRecord>,
}

#[derive(Serialize)]
struct SeriesReport {
    name: String,
    records: usize,
    monotonicity: Option<MonotonicityReport>,
    monotonicity_error: Option<String>,
    rho_limit: Option<RhoLimit>,
    rho_limit_error: Option<String>,
}

fn series_report(name: String, records: &[DiagnosticsRecord]) -> SeriesReport {
    let (monotonicity, monotonicity_error) = match monotonicity_report(records) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (rho_limit, rho_limit_error) = match rho_limit_extrapolate(records) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SeriesReport {
        name,
        records: records.len(),
        monotonicity,
        monotonicity_error,
        rho_limit,
        rho_limit_error,
    }
}

pub fn report(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let path = cfg.output_dir.join(RESULTS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io {
        message: format!("{}: {e}", path.display()),
        written: Vec::new(),
    })?;
    let stored: StoredResults = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut series = Vec::new();
    if !stored.records.is_empty() {
        series.push(series_report("main".into(), &stored.records));
    }
    for (name, arm) in &stored.arms {
        series.push(series_report(name.clone(), &arm.records));
    }
    if series.is_empty() {
        return Err(CliError::Config(format!("{} holds no diagnostics records", path.display())));
    }
    let summary: Vec<Value> = series
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "all_passed": s.monotonicity.as_ref().map(|m| m.all_passed()),
                "rho_extrapolated": s.rho_limit.as_ref().map(|r| r.extrapolated),
            })
        })
        .collect();
    let mut doc = header("report", cfg);
    doc.insert("source".into(), json!(path));
    doc.insert("series".into(), json!(series));
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(REPORT_FILE, &doc)?;
    Ok(json!(summary))
}
