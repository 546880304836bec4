//! Preconditioned limited-memory quasi-Newton descent with Armijo backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::functional::{weighted_sup, Donaldson, Evaluation};
use crate::differentials::{AlphaCoeffs, ClassCoeffs};
use crate::error::{GclabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    /// Factorized Hessian with `α` held fixed (drops the dense `dα/du` coupling).
    FrozenAlpha,
    /// Inverse lumped mass with the usual secant scaling.
    Mass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Tolerance on `max_i |∇D_i| / M_i`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Continuation stops once `max u − min u` exceeds this.
    pub blowup_guard: f64,
    pub preconditioner: Preconditioner,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 2000,
            memory: 10,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            blowup_guard: 40.0,
            preconditioner: Preconditioner::FrozenAlpha,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GclabError::InvalidArgument(m.to_string()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if self.memory < 1 {
            return bad("memory must be at least 1");
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return bad("armijo_c1 must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.blowup_guard > 0.0) {
            return bad("blowup_guard must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveState {
    pub t: f64,
    pub u: Vec<f64>,
    pub a: AlphaCoeffs,
    pub converged: bool,
    /// `max_i |∇D_i| / M_i` at `u`.
    pub grad_norm: f64,
    pub energy: f64,
    pub iterations: usize,
    /// Set when `max u − min u` exceeds the blow-up guard.
    pub blowup_flag: bool,
    /// Reason for stopping short of convergence.
    pub message: Option<String>,
}

impl SolveState {
    pub fn oscillation(&self) -> f64 {
        oscillation(&self.u)
    }
}

pub fn oscillation(u: &[f64]) -> f64 {
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

impl<'a> Donaldson<'a> {
    /// Minimizes `D_t(·; c)` from `u_init`. Returns the last state whether or
    /// not it converged; hard numerical failures at the start are errors.
    pub fn minimize(&self, t: f64, c: &ClassCoeffs, u_init: &[f64], cfg: &SolveConfig) -> Result<SolveState> {
        cfg.validate()?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(GclabError::InvalidArgument(format!("t = {t} must be positive")));
        }
        let mass = self.mass().to_vec();
        let mut u = u_init.to_vec();
        let mut eval = self.evaluate(t, &u, c)?;
        let mut g = self.gradient_from(t, &u, &eval)?;
        let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
        let mut message = None;
        let mut iterations = 0;

        let state = |u: Vec<f64>, eval: &Evaluation, g: &[f64], it: usize, msg: Option<String>| {
            let grad_norm = weighted_sup(g, &mass);
            SolveState {
                t,
                converged: grad_norm <= cfg.grad_tol,
                blowup_flag: oscillation(&u) > cfg.blowup_guard,
                u,
                a: eval.a.clone(),
                grad_norm,
                energy: eval.energy,
                iterations: it,
                message: msg,
            }
        };

        while iterations < cfg.max_iter {
            if weighted_sup(&g, &mass) <= cfg.grad_tol {
                break;
            }
            let h0 = self.initial_inverse(t, &u, &eval, &history, cfg)?;
            let mut d = two_loop(&g, &history, &h0);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                history.clear();
                d = h0.apply(&g).into_iter().map(|x| -x).collect();
                slope = dot(&g, &d);
                if !(slope < 0.0) {
                    message = Some("no descent direction".into());
                    break;
                }
            }

            let slack = 64.0 * f64::EPSILON * eval.magnitude;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(x, y)| x + step * y).collect();
                if let Ok(e) = self.evaluate(t, &trial, c) {
                    if e.energy <= eval.energy + cfg.armijo_c1 * step * slope + slack {
                        accepted = Some((trial, e));
                        break;
                    }
                }
                step *= cfg.backtrack;
            }
            let Some((trial, e)) = accepted else {
                message = Some(format!("line search failed after {} backtracks", cfg.max_backtracks));
                break;
            };
            let g_new = self.gradient_from(t, &trial, &e)?;
            let s: Vec<f64> = trial.iter().zip(&u).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if history.len() == cfg.memory {
                    history.pop_front();
                }
                history.push_back(Pair { s, y, rho: 1.0 / sy });
            }
            u = trial;
            eval = e;
            g = g_new;
            iterations += 1;
        }
        if iterations >= cfg.max_iter && weighted_sup(&g, &mass) > cfg.grad_tol && message.is_none() {
            message = Some(format!("max_iter = {} reached", cfg.max_iter));
        }
        Ok(state(u, &eval, &g, iterations, message))
    }

    fn initial_inverse(
        &self,
        t: f64,
        u: &[f64],
        eval: &Evaluation,
        history: &VecDeque<Pair>,
        cfg: &SolveConfig,
    ) -> Result<InitialInverse> {
        match cfg.preconditioner {
            Preconditioner::FrozenAlpha => {
                // H0 = ½K + D is factorized as ½(K + 2D)
                let d = self.frozen_alpha_diagonal(t, u, eval)?;
                let shift: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
                Ok(InitialInverse::Factor(Box::new(self.ops.factor_shifted(&shift)?)))
            }
            Preconditioner::Mass => {
                let gamma = history.back().map_or(1.0, |p| {
                    let ym: f64 = p.y.iter().zip(self.mass()).map(|(y, m)| y * y / m).sum();
                    dot(&p.s, &p.y) / ym
                });
                Ok(InitialInverse::Diagonal(self.mass().iter().map(|m| gamma / m).collect()))
            }
        }
    }
}

enum InitialInverse {
    Factor(Box<sprs_ldl::LdlNumeric<f64, usize>>),
    Diagonal(Vec<f64>),
}

impl InitialInverse {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            InitialInverse::Factor(ldl) => ldl.solve(v).into_iter().map(|x| 2.0 * x).collect(),
            InitialInverse::Diagonal(d) => v.iter().zip(d).map(|(a, b)| a * b).collect(),
        }
    }
}

/// Search direction `−H g` from the two-loop recursion.
fn two_loop(g: &[f64], history: &VecDeque<Pair>, h0: &InitialInverse) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(x, y)| *x -= a * y);
        alphas.push(a);
    }
    let mut r = h0.apply(&q);
    for (p, a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * dot(&p.y, &r);
        r.iter_mut().zip(&p.s).for_each(|(x, s)| *x += (a - b) * s);
    }
    r.into_iter().map(|x| -x).collect()
}
