//! Tools for checking the solvers: an independent reference solution,
//! convergence-order fits, finite-difference gradient checks and random
//! smooth test fields.

pub mod oracle;
pub mod order;

use rand::Rng;

use crate::error::Result;
use crate::field::{space_inner, SpaceSource, SpatialGrid};
use crate::objective::Objective;

pub use oracle::WentzellOracle;
pub use order::{fitted_order, pairwise_orders, OrderVerdict};

/// Steps tried by [`gradient_fd_check`].
pub const FD_STEPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    /// `⟨J'(f), v⟩` from the adjoint gradient.
    pub adjoint: f64,
    /// Central difference at the best step.
    pub finite_difference: f64,
    pub step: f64,
    pub relative_error: f64,
}

/// Compares the adjoint directional derivative with central differences of
/// the functional over [`FD_STEPS`] and keeps the step with the smallest
/// discrepancy.
pub fn gradient_fd_check(objective: &Objective<'_>, f: &SpaceSource, direction: &SpaceSource) -> Result<FdCheck> {
    let grid = objective.setup().space();
    let grad = objective.gradient(f)?;
    let adjoint = space_inner(grad.values.values(), direction.values(), grid)?;
    let mut best: Option<FdCheck> = None;
    for step in FD_STEPS {
        let plus = objective.value(&f.combine(1.0, direction, step)?)?;
        let minus = objective.value(&f.combine(1.0, direction, -step)?)?;
        let fd = (plus - minus) / (2.0 * step);
        let relative_error = (fd - adjoint).abs() / fd.abs().max(adjoint.abs()).max(f64::MIN_POSITIVE);
        if best.is_none_or(|b| relative_error < b.relative_error) {
            best = Some(FdCheck {
                adjoint,
                finite_difference: fd,
                step,
                relative_error,
            });
        }
    }
    Ok(best.expect("at least one step"))
}

/// `c₀ + c₁ x/ℓ + Σ_{j=1}^{4} (a_j cos(jπx/ℓ) + b_j sin(jπx/ℓ)) / j` with
/// coefficients uniform in `[−1, 1]`.
pub fn random_smooth(grid: &SpatialGrid, rng: &mut impl Rng) -> Vec<f64> {
    let c0: f64 = rng.random_range(-1.0..=1.0);
    let c1: f64 = rng.random_range(-1.0..=1.0);
    let modes: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
        .collect();
    let ell = grid.ell();
    grid.sample(|x| {
        let theta = std::f64::consts::PI * x / ell;
        let waves: f64 = modes
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let j = (j + 1) as f64;
                (a * (j * theta).cos() + b * (j * theta).sin()) / j
            })
            .sum();
        c0 + c1 * x / ell + waves
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grids;
    use crate::forward::ProblemSetup;
    use crate::landweber::{make_observation, NoiseMode};
    use crate::objective::TikhonovConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fd_check_on_a_coarse_grid() {
        let s = ProblemSetup::new(Grids::new(1.0, 32, 1.0, 64).unwrap());
        let truth = SpaceSource::sample(s.space(), |x| x * (1.0 - x));
        let obs = make_observation(&s, &truth, 0.01, 3, NoiseMode::ZeroMean).unwrap();
        let objective = Objective::new(&s, &obs.data, TikhonovConfig::new(1e-6).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = SpaceSource::new(s.space(), random_smooth(s.space(), &mut rng)).unwrap();
        let v = SpaceSource::new(s.space(), random_smooth(s.space(), &mut rng)).unwrap();
        let check = gradient_fd_check(&objective, &f, &v).unwrap();
        assert!(check.relative_error < 1e-6, "{check:?}");
    }

    #[test]
    fn random_fields_are_reproducible() {
        let grid = SpatialGrid::new(2.0, 16).unwrap();
        let a = random_smooth(&grid, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_smooth(&grid, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!(a.len(), 17);
    }
}
