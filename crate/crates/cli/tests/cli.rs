use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use gclab::differentials::{build_basis, ClassCoeffs};
use gclab::geometry::{build_bolza_group, build_mesh, C64};
use gclab::solver::Donaldson;
use serde_json::Value;

/// Shared across tests so the basis is built once per test binary run.
fn cache_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gclab-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn gclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gclab"))
        .args(args)
        .env("GCLAB_CACHE_DIR", cache_dir())
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = gclab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn results(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn csv_column(path: &Path, name: &str) -> Vec<Option<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let v = &r[idx];
            (!v.is_empty()).then(|| v.parse().unwrap())
        })
        .collect()
}

#[test]
fn solve_zero_class_is_the_constant_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    run_ok(&["solve", "--t", "0.5", "--class", "zero", "--out", out]);
    let r = results(tmp.path());
    let dev = r["summary"]["max_abs_u_minus_ln_inv_t"].as_f64().unwrap();
    assert!(dev <= 1e-7, "max |u - ln 2| = {dev}");
    assert_eq!(r["state"]["converged"], Value::Bool(true));
    assert!(tmp.path().join("fields_t0.csv").exists());
}

#[test]
fn continuation_zero_class_follows_closed_form_energy() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["continuation", "--class", "zero", "--out", tmp.path().to_str().unwrap()]);
    let curves = tmp.path().join("curves.csv");
    let t = csv_column(&curves, "t");
    let energy = csv_column(&curves, "energy");
    assert_eq!(t.len(), 25);
    for (t, e) in t.iter().zip(&energy) {
        let (t, e) = (t.unwrap(), e.unwrap());
        let exact = 4.0 * PI * (1.0 + t.ln());
        assert!((e - exact).abs() <= 1e-3 * exact.abs(), "t = {t}: {e} vs {exact}");
    }
    for rho in csv_column(&curves, "rho_t") {
        assert_eq!(rho, Some(0.0));
    }
    for name in ["plot_c_t.svg", "plot_rho_t.svg", "plot_xi_max.svg", "fields_t24.csv"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn nonmonotone_schedule_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "t_schedule = [1.0, 0.5, 0.7]\n");
    let res = gclab(&[
        "continuation",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(!out.exists());
}

#[test]
fn bad_class_specs_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for spec in ["unit:4", "unit:0", "point:1.5,0", "explicit:1,0", "banana"] {
        let res = gclab(&["solve", "--class", spec, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{spec}");
    }
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mesh_levle = 4\n");
    let res = gclab(&["mesh", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn report_without_results_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let res = gclab(&["report", "--out", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn kodaira_scan_needs_a_nonzero_class() {
    let tmp = tempfile::tempdir().unwrap();
    let res = gclab(&["kodaira-scan", "--class", "zero", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

const SHORT: &str = "t_schedule = [1.0, 0.5, 0.25, 0.125, 0.0625]\nclass = \"random:4\"\nkodaira_samples = 500\n";

#[test]
fn rerun_reproduces_results_except_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    let args = ["continuation", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    run_ok(&args);
    let first = strip(std::fs::read_to_string(out.join("results.json")).unwrap());
    let first_curves = std::fs::read(out.join("curves.csv")).unwrap();
    run_ok(&args);
    let second = strip(std::fs::read_to_string(out.join("results.json")).unwrap());
    assert_eq!(first, second);
    assert_eq!(first_curves, std::fs::read(out.join("curves.csv")).unwrap());
}

#[test]
fn config_echo_materializes_every_default() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    run_ok(&["mesh", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let echo = &results(&out)["config"];
    for key in [
        "mesh_level", "r_cut", "kappa", "power_count", "t", "t_schedule", "class", "seed",
        "kodaira_samples", "probe_point", "probe_seed", "plots", "output_dir", "solver",
    ] {
        assert!(!echo[key].is_null(), "{key} missing from echo");
    }
    assert_eq!(echo["solver"]["grad_tol"].as_f64(), Some(1e-8));
    let replay = tmp.path().join("replay.toml");
    std::fs::write(&replay, toml::to_string(echo).unwrap()).unwrap();
    run_ok(&["mesh", "--config", replay.to_str().unwrap()]);
    assert_eq!(results(&out)["config"], *echo);
}

#[test]
fn curves_row_count_matches_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    run_ok(&["continuation", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let t = csv_column(&out.join("curves.csv"), "t");
    assert_eq!(t.len(), 5);
    assert!(csv_column(&out.join("curves.csv"), "kodaira_dist").iter().all(Option::is_some));
}

#[test]
fn fields_csv_round_trips_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    run_ok(&["solve", "--t", "0.3", "--class", "random:2", "--out", out]);
    let r = results(tmp.path());
    let stored = r["state"]["energy"].as_f64().unwrap();
    let coeffs: Vec<C64> = serde_json::from_value(r["class"]["coefficients"].clone()).unwrap();
    let u: Vec<f64> = csv_column(&tmp.path().join("fields_t0.csv"), "u")
        .into_iter()
        .map(Option::unwrap)
        .collect();

    let group = Arc::new(build_bolza_group(10.0).unwrap());
    let (mesh, ops) = build_mesh(&group, 3).unwrap();
    let basis = build_basis(group, &mesh, 2, 8).unwrap();
    let p = Donaldson::new(&basis, &mesh, &ops);
    let energy = p.energy(0.3, &u, &ClassCoeffs(coeffs)).unwrap();
    assert!((energy - stored).abs() <= 1e-10, "{energy} vs {stored}");
}

#[test]
fn report_reads_continuation_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    run_ok(&["continuation", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    run_ok(&["report", "--out", out_s]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let series = &report["series"][0];
    assert_eq!(series["name"], "main");
    assert_eq!(series["records"], 5);
    assert!(series["monotonicity"]["checks"].as_array().unwrap().len() >= 5);
    assert!(series["rho_limit"]["extrapolated"].as_f64().is_some());
}

#[test]
fn blowup_probe_reports_both_arms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t_schedule = [1.0, 0.1, 0.01, 0.001]\nkodaira_samples = 500\nplots = false\n",
    );
    let out = tmp.path().join("out");
    run_ok(&["blowup-probe", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let r = results(&out);
    for arm in ["point", "random"] {
        let rep = &r["arms"][arm]["report"];
        for key in [
            "candidate_count",
            "sigma_estimates",
            "sigma_reference",
            "concentration_fraction",
            "s_minus_d_trace",
            "s_minus_d_bound",
            "energy_trace",
            "energy_bounded_below",
        ] {
            assert!(!rep[key].is_null(), "{arm}: {key}");
        }
        assert_eq!(rep["energy_trace"].as_array().unwrap().len(), 4);
        assert!(out.join(format!("curves_{arm}.csv")).exists());
    }
}
