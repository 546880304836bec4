//! Minimization of the reduced Donaldson functional and continuation in `t`.

mod functional;
mod minimize;

pub use functional::{solve_hermitian, weighted_sup, Donaldson, Evaluation, EXP_LIMIT};
pub use minimize::{oscillation, Preconditioner, SolveConfig, SolveState};

use serde::Serialize;

use crate::differentials::ClassCoeffs;
use crate::error::{GclabError, Result};

/// `count` logarithmically spaced values from `start` down to `end`.
pub fn log_schedule(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), end.ln());
    (0..count)
        .map(|i| match i {
            0 => start,
            i if i == count - 1 => end,
            i => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

/// The default schedule: 25 points from 1 to 1e−3.
pub fn default_schedule() -> Vec<f64> {
    log_schedule(1.0, 1e-3, 25)
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(GclabError::InvalidArgument("empty t schedule".into()));
    }
    if schedule.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(GclabError::InvalidArgument("t schedule must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GclabError::InvalidArgument("t schedule must be strictly decreasing".into()));
    }
    Ok(())
}

/// Outcome of a continuation run.
#[derive(Clone, Debug, Serialize)]
pub struct Continuation {
    /// States in schedule order, one per completed entry.
    pub states: Vec<SolveState>,
    /// Entries whose solve raised an error, with the message.
    pub failures: Vec<(f64, String)>,
    /// The `t` at which the blow-up guard tripped, if it did.
    pub blowup_at: Option<f64>,
}

impl Continuation {
    pub fn converged(&self) -> impl Iterator<Item = &SolveState> {
        self.states.iter().filter(|s| s.converged)
    }
}

impl<'a> Donaldson<'a> {
    /// Minimizes from `u ≡ 0`.
    pub fn solve(&self, t: f64, c: &ClassCoeffs, cfg: &SolveConfig) -> Result<SolveState> {
        self.minimize(t, c, &vec![0.0; self.vertex_count()], cfg)
    }

    /// Warm-started solves along a strictly decreasing schedule, starting from
    /// the `c = 0` solution `ln(1/t₀)`.
    pub fn continuation(&self, schedule: &[f64], c: &ClassCoeffs, cfg: &SolveConfig) -> Result<Continuation> {
        validate_schedule(schedule)?;
        cfg.validate()?;
        let mut u = vec![(1.0 / schedule[0]).ln(); self.vertex_count()];
        let mut run = Continuation {
            states: Vec::with_capacity(schedule.len()),
            failures: Vec::new(),
            blowup_at: None,
        };
        for &t in schedule {
            match self.minimize(t, c, &u, cfg) {
                Ok(state) => {
                    u.clone_from(&state.u);
                    let flagged = state.blowup_flag;
                    log::info!(
                        "t = {t:.4e}: energy {:.10e}, grad {:.2e}, {} iterations",
                        state.energy,
                        state.grad_norm,
                        state.iterations
                    );
                    run.states.push(state);
                    if flagged {
                        run.blowup_at = Some(t);
                        break;
                    }
                }
                Err(e) => {
                    log::warn!("t = {t:.4e}: {e}");
                    run.failures.push((t, e.to_string()));
                }
            }
        }
        Ok(run)
    }

    /// Euler–Lagrange residual of a state for class `c`.
    pub fn state_residual(&self, state: &SolveState, c: &ClassCoeffs) -> Result<f64> {
        self.el_residual(state.t, &state.u, c)
    }
}
