//! Experiment configuration: TOML file, command-line overrides, validation.

use std::path::{Path, PathBuf};

use gclab::differentials::kodaira::class_from_point;
use gclab::differentials::{ClassCoeffs, DifferentialBasis};
use gclab::geometry::C64;
use gclab::solver::{default_schedule, validate_schedule, SolveConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh_level: u32,
    pub r_cut: f64,
    pub kappa: u32,
    pub power_count: usize,
    /// Coupling for `solve`.
    pub t: f64,
    pub t_schedule: Vec<f64>,
    /// `zero`, `unit:j` (1-based), `random` (uses `seed`), `random:seed`,
    /// `point:x,y` or `explicit:re,im,re,im,...`.
    pub class: String,
    /// Seed for every other random choice of a run.
    pub seed: u64,
    pub kodaira_samples: usize,
    /// Chart point of the `point:` arm of `blowup-probe`.
    pub probe_point: [f64; 2],
    /// Seed of the random arm of `blowup-probe`.
    pub probe_seed: u64,
    pub plots: bool,
    pub output_dir: PathBuf,
    pub solver: SolveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mesh_level: 3,
            r_cut: gclab::differentials::basis::DEFAULT_R_CUT,
            kappa: 2,
            power_count: gclab::differentials::basis::DEFAULT_POWER_COUNT,
            t: 0.5,
            t_schedule: default_schedule(),
            class: "random:1".into(),
            seed: 0,
            kodaira_samples: 4000,
            probe_point: [0.0, 0.0],
            probe_seed: 1,
            plots: true,
            output_dir: PathBuf::from("gclab-out"),
            solver: SolveConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub t: Option<f64>,
    pub class: Option<String>,
    pub mesh_level: Option<u32>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(t) = overrides.t {
            cfg.t = t;
        }
        if let Some(c) = &overrides.class {
            cfg.class = c.clone();
        }
        if let Some(l) = overrides.mesh_level {
            cfg.mesh_level = l;
        }
        if let Some(o) = &overrides.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.mesh_level > 8 {
            return bad(format!("mesh_level {} exceeds 8", self.mesh_level));
        }
        if !(self.r_cut >= 4.0 && self.r_cut <= 16.0) {
            return bad(format!("r_cut {} outside [4, 16]", self.r_cut));
        }
        if self.kappa < 2 || self.kappa > 6 {
            return bad(format!("kappa {} outside [2, 6]", self.kappa));
        }
        let nu = gclab::differentials::differential_dimension(self.kappa, gclab::geometry::GENUS);
        if self.power_count < nu {
            return bad(format!("power_count {} below dimension {nu}", self.power_count));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t = {} must be positive", self.t));
        }
        validate_schedule(&self.t_schedule).map_err(|e| CliError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.kodaira_samples == 0 {
            return bad("kodaira_samples must be positive".into());
        }
        ClassSpec::parse(&self.class)?.check(nu)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassSpec {
    Zero,
    /// 1-based basis index.
    Unit(usize),
    /// Explicit seed, or the run seed when absent.
    Random(Option<u64>),
    Point(C64),
    Explicit(Vec<C64>),
}

fn numbers(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("bad number '{x}' in class spec")))
        })
        .collect()
}

impl ClassSpec {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let spec = spec.trim();
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let bad = || CliError::Config(format!("malformed class spec '{spec}'"));
        match kind {
            "zero" if arg.is_empty() => Ok(ClassSpec::Zero),
            "unit" => arg.parse().map(ClassSpec::Unit).map_err(|_| bad()),
            "random" if arg.is_empty() => Ok(ClassSpec::Random(None)),
            "random" => arg.parse().map(|s| ClassSpec::Random(Some(s))).map_err(|_| bad()),
            "point" => match numbers(arg)?.as_slice() {
                [x, y] => Ok(ClassSpec::Point(C64::new(*x, *y))),
                _ => Err(bad()),
            },
            "explicit" => {
                let v = numbers(arg)?;
                if v.is_empty() || v.len() % 2 != 0 {
                    return Err(bad());
                }
                Ok(ClassSpec::Explicit(v.chunks(2).map(|p| C64::new(p[0], p[1])).collect()))
            }
            _ => Err(bad()),
        }
    }

    /// Checks what can be checked without a basis.
    pub fn check(&self, nu: usize) -> Result<(), CliError> {
        match self {
            ClassSpec::Unit(j) if *j == 0 || *j > nu => {
                Err(CliError::Config(format!("unit index {j} outside 1..={nu}")))
            }
            ClassSpec::Point(z) if z.norm() >= 1.0 => {
                Err(CliError::Config(format!("point {z} outside the unit disk")))
            }
            ClassSpec::Explicit(v) if v.len() != nu => Err(CliError::Config(format!(
                "explicit class has {} entries, dimension is {nu}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn resolve(&self, basis: &DifferentialBasis, run_seed: u64) -> Result<ClassCoeffs, CliError> {
        self.check(basis.nu)?;
        Ok(match self {
            ClassSpec::Zero => ClassCoeffs::zero(basis.nu),
            ClassSpec::Unit(j) => ClassCoeffs::unit(basis.nu, j - 1),
            ClassSpec::Random(seed) => ClassCoeffs::random(basis.nu, seed.unwrap_or(run_seed)),
            ClassSpec::Point(q) => class_from_point(basis, *q)?,
            ClassSpec::Explicit(v) => ClassCoeffs(v.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        assert_eq!(ClassSpec::parse("zero").unwrap(), ClassSpec::Zero);
        assert_eq!(ClassSpec::parse("unit:2").unwrap(), ClassSpec::Unit(2));
        assert_eq!(ClassSpec::parse("random:7").unwrap(), ClassSpec::Random(Some(7)));
        assert_eq!(ClassSpec::parse("random").unwrap(), ClassSpec::Random(None));
        assert_eq!(
            ClassSpec::parse("point:0.1,-0.2").unwrap(),
            ClassSpec::Point(C64::new(0.1, -0.2))
        );
        assert_eq!(
            ClassSpec::parse("explicit:1,0,0,1").unwrap(),
            ClassSpec::Explicit(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)])
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in ["", "unit", "unit:x", "point:0.1", "explicit:1,2,3", "zero:1", "nope:1"] {
            assert!(ClassSpec::parse(s).is_err(), "{s}");
        }
        assert!(ClassSpec::Unit(0).check(3).is_err());
        assert!(ClassSpec::Unit(4).check(3).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn nonmonotone_schedule_is_a_config_error() {
        let cfg = ExperimentConfig {
            t_schedule: vec![1.0, 0.5, 0.7],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_solver_key_is_rejected() {
        let text = "[solver]\ngrad_tol = 1e-8\ngrad_toll = 1e-9\n";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
        let ok = "[solver]\ngrad_tol = 1e-9\n";
        let cfg: ExperimentConfig = toml::from_str(ok).unwrap();
        assert_eq!(cfg.solver.grad_tol, 1e-9);
        assert_eq!(cfg.solver.max_iter, 2000);
    }
}
