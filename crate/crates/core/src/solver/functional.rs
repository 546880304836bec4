//! The reduced Donaldson functional: `η` is eliminated exactly through the
//! inner solve `a = G(u)⁻¹ c`.

use nalgebra::{DMatrix, DVector};

use crate::differentials::{AlphaCoeffs, ClassCoeffs, DifferentialBasis};
use crate::error::{GclabError, Result};
use crate::geometry::{DiscreteOperators, SurfaceMesh, C64};

/// Largest exponent passed to `exp`.
pub const EXP_LIMIT: f64 = 700.0;
const CONDITION_WARNING: f64 = 1e12;

/// Discrete problem data shared by every solve on one surface.
#[derive(Clone, Copy)]
pub struct Donaldson<'a> {
    pub basis: &'a DifferentialBasis,
    pub mesh: &'a SurfaceMesh,
    pub ops: &'a DiscreteOperators,
}

/// Pieces of the reduced energy at one `u`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub energy: f64,
    pub a: AlphaCoeffs,
    /// `|Σ a_j φ_j|²` per vertex.
    pub alpha_fiber_sqr: Vec<f64>,
    /// Sum of absolute values of the energy terms, for rounding bounds.
    pub magnitude: f64,
}

impl<'a> Donaldson<'a> {
    pub fn new(basis: &'a DifferentialBasis, mesh: &'a SurfaceMesh, ops: &'a DiscreteOperators) -> Self {
        Self { basis, mesh, ops }
    }

    pub fn kappa(&self) -> u32 {
        self.basis.kappa
    }

    fn km1(&self) -> f64 {
        self.basis.kappa as f64 - 1.0
    }

    pub fn vertex_count(&self) -> usize {
        self.ops.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.ops.mass
    }

    pub fn area(&self) -> f64 {
        self.ops.mass.iter().sum()
    }

    fn check_field(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.vertex_count() {
            return Err(GclabError::ShapeMismatch {
                expected: self.vertex_count(),
                got: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(GclabError::InvalidArgument("non-finite field value".into()));
        }
        Ok(())
    }

    fn check_class(&self, c: &ClassCoeffs) -> Result<()> {
        if c.0.len() != self.basis.nu {
            return Err(GclabError::ShapeMismatch {
                expected: self.basis.nu,
                got: c.0.len(),
            });
        }
        Ok(())
    }

    /// `e^{−(κ−1)u_i}` with the overflow guard.
    fn inner_weights(&self, u: &[f64]) -> Result<Vec<f64>> {
        let k = self.km1();
        let worst = u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if -k * worst > EXP_LIMIT {
            return Err(GclabError::Overflow(worst.abs()));
        }
        Ok(u.iter().map(|&x| (-k * x).exp()).collect())
    }

    fn exp_field(&self, u: &[f64]) -> Result<Vec<f64>> {
        let top = u.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        if top > EXP_LIMIT {
            return Err(GclabError::Overflow(top));
        }
        Ok(u.iter().map(|x| x.exp()).collect())
    }

    /// `G_jk(u) = Σ_i M_i e^{−(κ−1)u_i} conj(φ_j(i)) φ_k(i)`.
    pub fn weighted_gram(&self, u: &[f64]) -> Result<DMatrix<C64>> {
        self.check_field(u)?;
        let w = self.inner_weights(u)?;
        let weights: Vec<f64> = w.iter().zip(self.mass()).map(|(a, m)| a * m).collect();
        Ok(self.basis.weighted_gram_with(&weights))
    }

    /// `a = G(u)⁻¹ c`.
    pub fn inner_solve(&self, u: &[f64], c: &ClassCoeffs) -> Result<AlphaCoeffs> {
        self.check_class(c)?;
        let g = self.weighted_gram(u)?;
        solve_hermitian(g, &c.0).map(AlphaCoeffs)
    }

    /// Energy, inner solution and fiber norms at `u`.
    pub fn evaluate(&self, t: f64, u: &[f64], c: &ClassCoeffs) -> Result<Evaluation> {
        if !(t >= 0.0) {
            return Err(GclabError::InvalidArgument(format!("t = {t} < 0")));
        }
        self.check_field(u)?;
        self.check_class(c)?;
        let m = self.mass();
        let eu = self.exp_field(u)?;
        let dirichlet = 0.25 * self.ops.dirichlet(u);
        let linear: f64 = u.iter().zip(m).map(|(x, w)| x * w).sum();
        let exp_term: f64 = t * eu.iter().zip(m).map(|(x, w)| x * w).sum::<f64>();
        let (a, inner) = if c.is_zero() {
            (AlphaCoeffs(vec![C64::new(0.0, 0.0); self.basis.nu]), 0.0)
        } else {
            let a = self.inner_solve(u, c)?;
            let ca: C64 = c.0.iter().zip(&a.0).map(|(x, y)| x.conj() * y).sum();
            (a, 4.0 * ca.re)
        };
        let alpha_fiber_sqr = self.basis.alpha_fiber(&a).iter().map(|v| v.norm_sqr()).collect();
        Ok(Evaluation {
            energy: dirichlet - linear + exp_term + inner,
            magnitude: dirichlet.abs() + linear.abs() + exp_term.abs() + inner.abs(),
            a,
            alpha_fiber_sqr,
        })
    }

    /// `D_t(u) = ¼uᵀKu − ∫u + t∫e^u + 4 c*G(u)⁻¹c`.
    pub fn energy(&self, t: f64, u: &[f64], c: &ClassCoeffs) -> Result<f64> {
        Ok(self.evaluate(t, u, c)?.energy)
    }

    /// Envelope form of the gradient from an evaluation at the same `u`.
    pub fn gradient_from(&self, t: f64, u: &[f64], eval: &Evaluation) -> Result<Vec<f64>> {
        let k = self.km1();
        let ku = self.ops.apply_stiffness(u);
        let eu = self.exp_field(u)?;
        let w = self.inner_weights(u)?;
        Ok((0..u.len())
            .map(|i| {
                0.5 * ku[i]
                    + self.mass()[i] * (-1.0 + t * eu[i] + 4.0 * k * w[i] * eval.alpha_fiber_sqr[i])
            })
            .collect())
    }

    /// Gradient of the reduced energy (envelope form).
    pub fn gradient(&self, t: f64, u: &[f64], c: &ClassCoeffs) -> Result<Vec<f64>> {
        let eval = self.evaluate(t, u, c)?;
        self.gradient_from(t, u, &eval)
    }

    /// Gradient with the `a`-term differentiated as `−4 (G⁻¹c)* ∂_i G (G⁻¹c)`.
    pub fn gradient_matrix_form(&self, t: f64, u: &[f64], c: &ClassCoeffs) -> Result<Vec<f64>> {
        let k = self.km1();
        let nu = self.basis.nu;
        let a = if c.is_zero() {
            AlphaCoeffs(vec![C64::new(0.0, 0.0); nu])
        } else {
            self.inner_solve(u, c)?
        };
        let ku = self.ops.apply_stiffness(u);
        let eu = self.exp_field(u)?;
        let w = self.inner_weights(u)?;
        let mut dg = DMatrix::<C64>::zeros(nu, nu);
        let av = DVector::from_column_slice(&a.0);
        Ok((0..u.len())
            .map(|i| {
                let row = self.basis.fiber_row(i);
                let scale = -k * self.mass()[i] * w[i];
                for j in 0..nu {
                    for l in 0..nu {
                        dg[(j, l)] = row[j].conj() * row[l] * scale;
                    }
                }
                let quad = (av.adjoint() * &dg * &av)[(0, 0)].re;
                0.5 * ku[i] + self.mass()[i] * (-1.0 + t * eu[i]) - 4.0 * quad
            })
            .collect())
    }

    /// Diagonal of the Hessian with `α` frozen, minus the `½K` part.
    pub fn frozen_alpha_diagonal(&self, t: f64, u: &[f64], eval: &Evaluation) -> Result<Vec<f64>> {
        let k = self.km1();
        let eu = self.exp_field(u)?;
        let w = self.inner_weights(u)?;
        Ok((0..u.len())
            .map(|i| self.mass()[i] * (t * eu[i] + 4.0 * k * k * w[i] * eval.alpha_fiber_sqr[i]))
            .collect())
    }

    /// M⁻¹-weighted ∞-norm of `Ku + M(−2 + 2te^u + 8(κ−1)e^{−(κ−1)u}‖α‖²)`.
    pub fn el_residual(&self, t: f64, u: &[f64], c: &ClassCoeffs) -> Result<f64> {
        let eval = self.evaluate(t, u, c)?;
        let g = self.gradient_from(t, u, &eval)?;
        Ok(weighted_sup(&g, self.mass()) * 2.0)
    }
}

/// `max_i |g_i| / M_i`.
pub fn weighted_sup(g: &[f64], mass: &[f64]) -> f64 {
    g.iter().zip(mass).fold(0.0, |m, (x, w)| m.max((x / w).abs()))
}

/// Cholesky solve of a Hermitian positive-definite system.
pub fn solve_hermitian(g: DMatrix<C64>, rhs: &[C64]) -> Result<Vec<C64>> {
    if g.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(GclabError::SingularGram);
    }
    let chol = g.cholesky().ok_or(GclabError::SingularGram)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) {
        return Err(GclabError::SingularGram);
    }
    let cond = (hi / lo).powi(2);
    if cond > CONDITION_WARNING {
        log::warn!("weighted Gram condition estimate {cond:.3e}");
    }
    let x = chol.solve(&DVector::from_column_slice(rhs));
    Ok(x.iter().copied().collect())
}
