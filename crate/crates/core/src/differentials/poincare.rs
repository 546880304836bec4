//! Relative Poincaré series `Σ_γ γ′(z)^κ (γz)^m` over the displacement ball.

use crate::error::Result;
use crate::geometry::{FuchsianGroup, C64};

/// Single series value for the seed monomial `z^m`. No reduction is applied;
/// callers reduce `z` to the fundamental domain first for fast convergence.
pub fn poincare_series(group: &FuchsianGroup, kappa: u32, m: u32, z: C64) -> C64 {
    group
        .ball_elements
        .iter()
        .map(|g| g.derivative_unchecked(z).powu(kappa) * g.apply_unchecked(z).powu(m))
        .sum()
}

/// All seed monomials `m = 0..power_count` at once.
pub fn poincare_series_all(group: &FuchsianGroup, kappa: u32, power_count: usize, z: C64) -> Vec<C64> {
    let mut acc = vec![C64::new(0.0, 0.0); power_count];
    for g in &group.ball_elements {
        let w = g.apply_unchecked(z);
        let mut term = g.derivative_unchecked(z).powu(kappa);
        for slot in acc.iter_mut() {
            *slot += term;
            term *= w;
        }
    }
    acc
}

/// Series values at an arbitrary disk point: reduce to the octagon, evaluate,
/// and pull back with the automorphy factor `γ′(z)^κ`.
pub fn poincare_series_reduced(
    group: &FuchsianGroup,
    kappa: u32,
    power_count: usize,
    z: C64,
) -> Result<Vec<C64>> {
    let (z0, gamma) = group.reduce_to_domain(z)?;
    let factor = gamma.derivative_unchecked(z).powu(kappa);
    Ok(poincare_series_all(group, kappa, power_count, z0)
        .into_iter()
        .map(|v| v * factor)
        .collect())
}
