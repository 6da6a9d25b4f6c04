//! Backward adjoint problem
//!
//! ```text
//!   −φ_t − d φ_xx + a φ = 0,     −φ_t(t,0) − d φ_x(t,0) + b₀ φ(t,0) = 0,
//!   −φ_t(t,ℓ) + d φ_x(t,ℓ) + b_ℓ φ(t,ℓ) = 0,     φ(T) = Y(T) − Y_T^δ.
//! ```
//!
//! Substituting `s = T − t` flips the sign of every time derivative, after
//! which the system is the direct problem with no sources and the terminal
//! residual as initial data. It is therefore advanced with the forward
//! Crank–Nicolson propagator and the result is re-indexed by `t`.

use crate::error::{ensure_len, Result};
use crate::field::{product_inner, space_inner, BoundarySourcePair, ProductState, SpaceSource, SpatialGrid};
use crate::forward::{conserved_quantity, FluxSign, ForwardSolver, ProblemSetup, Stepper};

/// `φ(T) = Y(T; f) − Y_T^δ`, boundary components included.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalResidual {
    residual: ProductState,
}

impl TerminalResidual {
    pub fn new(final_state: &ProductState, data: &ProductState) -> Result<Self> {
        Ok(Self {
            residual: final_state.difference(data)?,
        })
    }

    pub fn from_state(residual: ProductState) -> Self {
        Self { residual }
    }

    pub fn residual(&self) -> &ProductState {
        &self.residual
    }
}

/// `φ(t_k)` for `k = 0..=n_steps`, indexed by forward time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub states: Vec<ProductState>,
}

impl AdjointTrajectory {
    pub fn terminal(&self) -> &ProductState {
        self.states.last().expect("adjoint trajectory is never empty")
    }

    pub fn norms(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        self.states.iter().map(|s| s.norm(grid)).collect()
    }
}

/// Time integrals of the adjoint that make up the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointIntegrals {
    /// `∫₀^T φ(t,x) r(t,x) dt` at each node.
    pub modulated: Vec<f64>,
    /// `φ(t,0)` and `φ(t,ℓ)` at each time level.
    pub boundary_traces: BoundarySourcePair,
}

#[derive(Debug, Clone)]
pub struct AdjointSolver<'a> {
    setup: &'a ProblemSetup,
    stepper: Stepper,
}

impl<'a> AdjointSolver<'a> {
    pub fn new(setup: &'a ProblemSetup) -> Result<Self> {
        Self::with_flux_sign(setup, FluxSign::Physical)
    }

    /// Builds the solver with a chosen boundary-flux sign. Anything other
    /// than [`FluxSign::Physical`] produces a wrong adjoint on purpose.
    pub fn with_flux_sign(setup: &'a ProblemSetup, flux: FluxSign) -> Result<Self> {
        Ok(Self {
            setup,
            stepper: Stepper::assemble(setup, flux)?,
        })
    }

    /// Shares the factorised propagator of a forward solver on the same setup.
    pub fn from_forward(forward: &ForwardSolver<'a>) -> Self {
        Self {
            setup: forward.setup(),
            stepper: forward.stepper().clone(),
        }
    }

    fn check(&self, res: &TerminalResidual) -> Result<()> {
        ensure_len("terminal residual", self.setup.space().n_nodes(), res.residual.len())
    }

    pub fn solve(&self, res: &TerminalResidual) -> Result<AdjointTrajectory> {
        self.check(res)?;
        let mut reversed = Vec::with_capacity(self.setup.time().n_times());
        self.stepper
            .march(self.setup, res.residual.values(), None, None, |_, phi| {
                reversed.push(ProductState::from_nodes(phi.to_vec()));
            })?;
        reversed.reverse();
        Ok(AdjointTrajectory { states: reversed })
    }

    /// Accumulates `∫ φ r dt` (trapezoid) and the boundary traces while
    /// marching, without storing the trajectory.
    pub fn integrals(&self, res: &TerminalResidual) -> Result<AdjointIntegrals> {
        self.check(res)?;
        let time = self.setup.time();
        let steps = time.n_steps();
        let weights = time.trapezoid_weights();
        let n_nodes = self.setup.space().n_nodes();
        let mut modulated = vec![0.0; n_nodes];
        let mut traces = BoundarySourcePair::zeros(time);
        self.stepper
            .march(self.setup, res.residual.values(), None, None, |s, phi| {
                let k = steps - s;
                let r = self.setup.modulation_at(k);
                let w = weights[k];
                for i in 0..n_nodes {
                    modulated[i] += w * phi[i] * r[i];
                }
                traces.left[k] = phi[0];
                traces.right[k] = phi[n_nodes - 1];
            })?;
        Ok(AdjointIntegrals {
            modulated,
            boundary_traces: traces,
        })
    }
}

pub fn solve_adjoint(setup: &ProblemSetup, res: &TerminalResidual) -> Result<AdjointTrajectory> {
    AdjointSolver::new(setup)?.solve(res)
}

/// `∫₀^T ∫₀^ℓ f r φ dx dt + ∫₀^T (G₀ φ(t,0) + G_ℓ φ(t,ℓ)) dt`: the space-time
/// pairing of the source `(f r, G)` with an adjoint trajectory.
pub fn source_pairing(
    setup: &ProblemSetup,
    f: &SpaceSource,
    boundary: Option<&BoundarySourcePair>,
    adjoint: &AdjointTrajectory,
) -> Result<f64> {
    let grid = setup.space();
    let time = setup.time();
    ensure_len("source", grid.n_nodes(), f.len())?;
    ensure_len("adjoint time levels", time.n_times(), adjoint.states.len())?;
    let weights = time.trapezoid_weights();
    let mut fr = vec![0.0; f.len()];
    let mut acc = 0.0;
    for (k, phi) in adjoint.states.iter().enumerate() {
        for ((o, fi), ri) in fr.iter_mut().zip(f.values()).zip(setup.modulation_at(k)) {
            *o = fi * ri;
        }
        let mut level = space_inner(&fr, phi.values(), grid)?;
        if let Some(g) = boundary {
            level += g.left[k] * phi.left() + g.right[k] * phi.right();
        }
        acc += weights[k] * level;
    }
    Ok(acc)
}

/// Relative defect of the duality `⟨Ψ δf, w⟩ = ⟨δf r, Φ_w⟩` where `Φ_w` is
/// the adjoint with terminal datum `w`.
pub fn adjoint_identity_gap(setup: &ProblemSetup, df: &SpaceSource, w: &ProductState) -> Result<f64> {
    let forward = ForwardSolver::new(setup)?;
    let adjoint = AdjointSolver::from_forward(&forward);
    adjoint_identity_gap_with(&forward, &adjoint, df, None, w)
}

/// As [`adjoint_identity_gap`], with explicit solvers and an optional
/// boundary source perturbation `δG`.
pub fn adjoint_identity_gap_with(
    forward: &ForwardSolver<'_>,
    adjoint: &AdjointSolver<'_>,
    df: &SpaceSource,
    dg: Option<&BoundarySourcePair>,
    w: &ProductState,
) -> Result<f64> {
    let setup = forward.setup();
    let grid = setup.space();
    let response = forward.response_general(df, dg)?;
    let lhs = product_inner(&response, w, grid)?;
    let phi = adjoint.solve(&TerminalResidual::from_state(w.clone()))?;
    let rhs = source_pairing(setup, df, dg, &phi)?;
    let scale = response.norm(grid)? * w.norm(grid)?;
    Ok((lhs - rhs).abs() / (scale + f64::MIN_POSITIVE))
}

/// Largest change of `∫ φ dx + φ(0) + φ(ℓ)` along the trajectory relative
/// to its terminal value, scaled by `√(ℓ+2) ‖φ(T)‖`, which bounds `|Q|`.
pub fn conserved_drift(adjoint: &AdjointTrajectory, grid: &SpatialGrid) -> Result<f64> {
    let terminal = adjoint.terminal();
    let q_terminal = conserved_quantity(terminal, grid)?;
    let scale = (grid.ell() + 2.0).sqrt() * terminal.norm(grid)?;
    let mut worst = 0.0f64;
    for s in &adjoint.states {
        worst = worst.max((conserved_quantity(s, grid)? - q_terminal).abs());
    }
    Ok(worst / (scale + f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grids;

    fn setup(n: usize, m: usize) -> ProblemSetup {
        ProblemSetup::new(Grids::new(1.0, n, 1.0, m).unwrap())
    }

    #[test]
    fn zero_residual_gives_zero_adjoint() {
        let s = setup(16, 8);
        let phi = solve_adjoint(&s, &TerminalResidual::from_state(ProductState::zeros(s.space()))).unwrap();
        assert_eq!(phi.states.len(), 9);
        assert!(phi.states.iter().all(|p| p.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn constant_residual_is_stationary() {
        let s = setup(16, 8);
        let c = ProductState::constant(s.space(), -1.5);
        let phi = solve_adjoint(&s, &TerminalResidual::from_state(c.clone())).unwrap();
        assert_eq!(*phi.terminal(), c);
        for p in &phi.states {
            assert!(p.values().iter().all(|v| (v + 1.5).abs() < 1e-13));
        }
    }

    #[test]
    fn trivial_identity_gaps() {
        let s = setup(32, 16);
        let w = ProductState::sample(s.space(), |x| x.cos());
        let zero_f = SpaceSource::zeros(s.space());
        assert_eq!(adjoint_identity_gap(&s, &zero_f, &w).unwrap(), 0.0);
        let f = SpaceSource::sample(s.space(), |x| x.sin());
        assert_eq!(
            adjoint_identity_gap(&s, &f, &ProductState::zeros(s.space())).unwrap(),
            0.0
        );
    }

    #[test]
    fn identity_holds_with_potentials_and_boundary_sources() {
        let s = setup(64, 128)
            .with_diffusion(0.7)
            .unwrap()
            .with_potential(|x| 0.5 + x)
            .unwrap()
            .with_boundary_potentials(0.3, 1.2)
            .unwrap();
        let forward = ForwardSolver::new(&s).unwrap();
        let adjoint = AdjointSolver::new(&s).unwrap();
        let f = SpaceSource::sample(s.space(), |x| (3.0 * x).sin() + 0.2);
        let g = BoundarySourcePair::sample(s.time(), |_| 0.4, |_| -1.0);
        let w = ProductState::sample(s.space(), |x| 1.0 - x * x);
        let gap = adjoint_identity_gap_with(&forward, &adjoint, &f, Some(&g), &w).unwrap();
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn flipped_flux_breaks_the_identity() {
        let s = setup(32, 64);
        let forward = ForwardSolver::new(&s).unwrap();
        let wrong = AdjointSolver::with_flux_sign(&s, FluxSign::Flipped).unwrap();
        let f = SpaceSource::sample(s.space(), |x| x * x * (1.0 - x));
        let w = ProductState::sample(s.space(), |x| (3.0 * x).cos());
        let gap = adjoint_identity_gap_with(&forward, &wrong, &f, None, &w).unwrap();
        assert!(gap > 1e-2, "{gap}");
    }

    #[test]
    fn integrals_match_stored_trajectory() {
        let s = setup(16, 32).with_modulation(|t, x| 1.0 + t * x).unwrap();
        let res = TerminalResidual::from_state(ProductState::sample(s.space(), |x| (2.0 * x).exp()));
        let solver = AdjointSolver::new(&s).unwrap();
        let traj = solver.solve(&res).unwrap();
        let ints = solver.integrals(&res).unwrap();
        let w = s.time().trapezoid_weights();
        for i in 0..s.space().n_nodes() {
            let direct: f64 = (0..w.len())
                .map(|k| w[k] * traj.states[k].values()[i] * s.modulation_at(k)[i])
                .sum();
            assert!((direct - ints.modulated[i]).abs() < 1e-13);
        }
        assert_eq!(ints.boundary_traces.left[0], traj.states[0].left());
        assert_eq!(ints.boundary_traces.right[32], traj.terminal().right());
    }
}
