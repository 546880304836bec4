//! Result files: JSON summary, CSV curves and fields, SVG line plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gclab::asymptotics::{xi_field, DiagnosticsRecord};
use gclab::solver::{Donaldson, SolveState};
use serde::Serialize;

use crate::error::CliError;

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes files into one directory and remembers what it wrote, so an I/O
/// failure can report the partial output.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let mut out = Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        };
        std::fs::create_dir_all(dir).map_err(|e| out.io_error(e))?;
        Ok(out)
    }

    fn io_error(&mut self, e: impl std::fmt::Display) -> CliError {
        CliError::Io {
            message: format!("{}: {e}", self.dir.display()),
            written: self.written.clone(),
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| self.io_error(e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| self.io_error(e))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| self.io_error(e))?;
        for row in rows {
            w.write_record(row).map_err(|e| self.io_error(e))?;
        }
        let bytes = w.into_inner().map_err(|e| self.io_error(e))?;
        self.write_bytes(name, &bytes)
    }
}

pub const CURVE_COLUMNS: [&str; 10] = [
    "t",
    "c_mean",
    "energy",
    "d_t",
    "s_t",
    "rho_t",
    "mass_residual",
    "xi_max",
    "te_u_max",
    "kodaira_dist",
];

pub fn curve_rows(records: &[DiagnosticsRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                num(r.t),
                opt(r.c_mean),
                num(r.energy),
                num(r.d_t),
                opt(r.s_t),
                num(r.rho_t),
                num(r.mass_residual),
                opt(r.xi_max),
                num(r.te_u_max),
                opt(r.kodaira_dist),
            ]
        })
        .collect()
}

pub const FIELD_COLUMNS: [&str; 6] = ["vertex", "x", "y", "u", "xi", "e_minus_u_mass"];

pub fn field_rows(p: &Donaldson, state: &SolveState) -> Result<Vec<Vec<String>>, CliError> {
    let xi = if state.a.norm_sqr() > 0.0 {
        Some(xi_field(p, state)?)
    } else {
        None
    };
    Ok(p.mesh
        .points
        .iter()
        .enumerate()
        .map(|(i, z)| {
            vec![
                i.to_string(),
                num(z.re),
                num(z.im),
                num(state.u[i]),
                opt(xi.as_ref().map(|x| x[i])),
                num(p.mass()[i] * (-state.u[i]).exp()),
            ]
        })
        .collect())
}

/// Line plot against `log10 t`, points with a missing value skipped.
pub fn line_plot_svg(title: &str, points: &[(f64, Option<f64>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 60.0;
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|&(t, y)| y.filter(|v| v.is_finite() && t > 0.0).map(|v| (t.log10(), v)))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        W / 2.0
    );
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    if !pts.is_empty() {
        for (label, x, y, anchor) in [
            (format!("log10 t = {x0:.3}"), PAD, H - PAD + 20.0, "start"),
            (format!("{x1:.3}"), W - PAD, H - PAD + 20.0, "end"),
            (format!("{y0:.4e}"), 4.0, H - PAD, "start"),
            (format!("{y1:.4e}"), 4.0, PAD - 6.0, "start"),
        ] {
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{label}</text>"#
            );
        }
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

type Series = (&'static str, &'static str, fn(&DiagnosticsRecord) -> Option<f64>);

pub fn write_plots(out: &mut OutputDir, records: &[DiagnosticsRecord], suffix: &str) -> Result<(), CliError> {
    let series: [Series; 3] = [
        ("c_t", "energy c_t against log t", |r| Some(r.energy)),
        ("rho_t", "rho_t against log t", |r| Some(r.rho_t)),
        ("xi_max", "max xi_t against log t", |r| r.xi_max),
    ];
    for (name, title, f) in series {
        let pts: Vec<_> = records.iter().map(|r| (r.t, f(r))).collect();
        out.write_bytes(&format!("plot_{name}{suffix}.svg"), line_plot_svg(title, &pts).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        let s = num(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn plot_skips_missing_values() {
        let svg = line_plot_svg("x", &[(1.0, Some(1.0)), (0.1, None), (0.01, Some(2.0))]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let empty = line_plot_svg("x", &[(1.0, None)]);
        assert!(!empty.contains("<polyline"));
    }
}
