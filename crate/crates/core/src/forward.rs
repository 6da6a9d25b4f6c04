//! Direct problem: the heat equation on `(0, ℓ)` whose endpoint values obey
//! their own evolution equations (dynamic boundary conditions)
//!
//! ```text
//!   y_t − d y_xx + a(x) y = f(x) r(t,x)            in (0,T) × (0,ℓ)
//!   y_t(t,0) − d y_x(t,0) + b₀ y(t,0) = g₀(t)
//!   y_t(t,ℓ) + d y_x(t,ℓ) + b_ℓ y(t,ℓ) = g_ℓ(t)
//! ```
//!
//! Method of lines on the uniform node grid followed by Crank–Nicolson in
//! time. The endpoint nodes are the boundary unknowns. Their equations come
//! from a flux balance over the half cell adjacent to the boundary plus the
//! boundary's own unit mass:
//!
//! ```text
//!   (1 + h/2) y₀' = d (y₁ − y₀)/h − (h/2 a₀ + b₀) y₀ + (h/2) f₀ r₀ + g₀
//! ```
//!
//! which is second order, keeps the per-step system tridiagonal, and makes
//! `∫ y dx + y(0) + y(ℓ)` (trapezoid) an exact discrete invariant when
//! `a = b = 0` and there are no sources.

use crate::error::{ensure_len, Error, Result};
use crate::field::{
    product_inner, space_inner, BoundarySourcePair, Grids, ProductState, SpaceSource, SpatialGrid, TimeGrid,
};
use crate::tridiag::{tridiag_matvec, TridiagonalLu};

/// Known data of the direct problem on a fixed discretisation.
///
/// Coefficient callbacks are sampled once onto the grid at construction.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    grids: Grids,
    diffusion: f64,
    potential: Vec<f64>,
    b_left: f64,
    b_right: f64,
    // r(t_k, x_i) stored row-major by time level
    modulation: Vec<f64>,
    initial: ProductState,
    boundary_source: Option<BoundarySourcePair>,
}

impl ProblemSetup {
    /// `d = 1`, `a = b = 0`, `r ≡ 1`, zero initial data and no boundary source.
    pub fn new(grids: Grids) -> Self {
        let nodes = grids.space.n_nodes();
        Self {
            grids,
            diffusion: 1.0,
            potential: vec![0.0; nodes],
            b_left: 0.0,
            b_right: 0.0,
            modulation: vec![1.0; nodes * grids.time.n_times()],
            initial: ProductState::zeros(&grids.space),
            boundary_source: None,
        }
    }

    pub fn with_diffusion(mut self, d: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("diffusion must be positive, got {d}")));
        }
        self.diffusion = d;
        Ok(self)
    }

    pub fn with_potential(mut self, a: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.grids.space.sample(a);
        ensure_finite("potential", &values)?;
        self.potential = values;
        Ok(self)
    }

    /// Potential given by its nodal values.
    pub fn with_potential_values(mut self, values: Vec<f64>) -> Result<Self> {
        ensure_len("potential", self.grids.space.n_nodes(), values.len())?;
        ensure_finite("potential", &values)?;
        self.potential = values;
        Ok(self)
    }

    pub fn with_boundary_potentials(mut self, b_left: f64, b_right: f64) -> Result<Self> {
        ensure_finite("boundary potential", &[b_left, b_right])?;
        self.b_left = b_left;
        self.b_right = b_right;
        Ok(self)
    }

    pub fn with_modulation(mut self, r: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let x = self.grids.space.nodes();
        let mut values = Vec::with_capacity(x.len() * self.grids.time.n_times());
        for t in self.grids.time.times() {
            values.extend(x.iter().map(|&xi| r(t, xi)));
        }
        ensure_finite("modulation", &values)?;
        self.modulation = values;
        Ok(self)
    }

    pub fn with_initial(mut self, y0: ProductState) -> Result<Self> {
        ensure_len("initial state", self.grids.space.n_nodes(), y0.len())?;
        ensure_finite("initial state", y0.values())?;
        self.initial = y0;
        Ok(self)
    }

    pub fn with_boundary_source(mut self, g: BoundarySourcePair) -> Result<Self> {
        ensure_len("left boundary series", self.grids.time.n_times(), g.left.len())?;
        ensure_len("right boundary series", self.grids.time.n_times(), g.right.len())?;
        self.boundary_source = Some(g);
        Ok(self)
    }

    pub fn grids(&self) -> &Grids {
        &self.grids
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.grids.space
    }

    pub fn time(&self) -> &TimeGrid {
        &self.grids.time
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn boundary_potentials(&self) -> (f64, f64) {
        (self.b_left, self.b_right)
    }

    /// `r(t_k, ·)` at every node.
    pub fn modulation_at(&self, k: usize) -> &[f64] {
        let n = self.grids.space.n_nodes();
        &self.modulation[k * n..(k + 1) * n]
    }

    pub fn initial(&self) -> &ProductState {
        &self.initial
    }

    pub fn boundary_source(&self) -> Option<&BoundarySourcePair> {
        self.boundary_source.as_ref()
    }

    /// `max(‖a‖∞, ‖b‖∞)`.
    pub fn max_potential(&self) -> f64 {
        self.potential
            .iter()
            .chain([&self.b_left, &self.b_right])
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn potentials_vanish(&self) -> bool {
        self.max_potential() == 0.0
    }

    /// Same problem with zero initial data and no boundary source: the
    /// setting in which `f ↦ Y(T)` is the linear input-output map.
    pub fn homogeneous(&self) -> Self {
        Self {
            initial: ProductState::zeros(&self.grids.space),
            boundary_source: None,
            ..self.clone()
        }
    }

    /// ‖(f·r, G)‖² over the space-time cylinder, G being `boundary` if given.
    pub fn source_norm_sq(&self, f: &SpaceSource, boundary: Option<&BoundarySourcePair>) -> Result<f64> {
        ensure_len("source", self.space().n_nodes(), f.len())?;
        let w = self.time().trapezoid_weights();
        let mut fr = vec![0.0; f.len()];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            for ((o, fi), ri) in fr.iter_mut().zip(f.values()).zip(self.modulation_at(k)) {
                *o = fi * ri;
            }
            acc += wk * space_inner(&fr, &fr, self.space())?;
        }
        if let Some(g) = boundary {
            acc += g.norm_sq(self.time())?;
        }
        Ok(acc)
    }
}

fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} contains non-finite values")))
    }
}

/// Sign applied to the boundary diffusive flux when assembling the boundary
/// rows. Only [`FluxSign::Physical`] discretises the model; the flipped
/// variant exists to build deliberately wrong solvers for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxSign {
    #[default]
    Physical,
    Flipped,
}

impl FluxSign {
    fn factor(self) -> f64 {
        match self {
            FluxSign::Physical => 1.0,
            FluxSign::Flipped => -1.0,
        }
    }
}

/// Crank–Nicolson propagator `(W + Δt/2 K) y⁺ = (W − Δt/2 K) y + Δt/2 (S + S⁺)`
/// with lumped mass `W` and symmetric stiffness `K`.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    implicit: TridiagonalLu,
    explicit_sub: Vec<f64>,
    explicit_diag: Vec<f64>,
    explicit_sup: Vec<f64>,
    quadrature: Vec<f64>,
    dt: f64,
}

impl Stepper {
    pub(crate) fn assemble(setup: &ProblemSetup, flux: FluxSign) -> Result<Self> {
        let grid = setup.space();
        let n = grid.n_cells();
        let h = grid.dx();
        let d = setup.diffusion();
        let a = setup.potential();
        let (b0, bl) = setup.boundary_potentials();
        let dt = setup.time().dt();
        let s = flux.factor();

        let quadrature = grid.trapezoid_weights();
        let mut mass = quadrature.clone();
        mass[0] += 1.0;
        mass[n] += 1.0;

        let mut k_sub = vec![0.0; n + 1];
        let mut k_diag = vec![0.0; n + 1];
        let mut k_sup = vec![0.0; n + 1];
        for i in 1..n {
            k_sub[i] = -d / h;
            k_diag[i] = 2.0 * d / h + h * a[i];
            k_sup[i] = -d / h;
        }
        k_diag[0] = s * d / h + 0.5 * h * a[0] + b0;
        k_sup[0] = -s * d / h;
        k_diag[n] = s * d / h + 0.5 * h * a[n] + bl;
        k_sub[n] = -s * d / h;

        let half = 0.5 * dt;
        let lhs_sub: Vec<f64> = k_sub.iter().map(|k| half * k).collect();
        let lhs_sup: Vec<f64> = k_sup.iter().map(|k| half * k).collect();
        let lhs_diag: Vec<f64> = mass.iter().zip(&k_diag).map(|(m, k)| m + half * k).collect();
        let implicit = TridiagonalLu::factor(&lhs_sub, &lhs_diag, &lhs_sup)?;

        Ok(Self {
            implicit,
            explicit_sub: lhs_sub.iter().map(|v| -v).collect(),
            explicit_diag: mass.iter().zip(&k_diag).map(|(m, k)| m - half * k).collect(),
            explicit_sup: lhs_sup.iter().map(|v| -v).collect(),
            quadrature,
            dt,
        })
    }

    /// Load vector at time level `k`: `H f r(t_k)` plus boundary sources.
    fn load(
        &self,
        setup: &ProblemSetup,
        k: usize,
        source: Option<&SpaceSource>,
        boundary: Option<&BoundarySourcePair>,
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some(f) = source {
            let r = setup.modulation_at(k);
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.quadrature[i] * f.values()[i] * r[i];
            }
        }
        if let Some(g) = boundary {
            let n = out.len() - 1;
            out[0] += g.left[k];
            out[n] += g.right[k];
        }
    }

    /// Advances from `start` over every time level, handing each level
    /// (including the first) to `visit`.
    pub(crate) fn march(
        &self,
        setup: &ProblemSetup,
        start: &[f64],
        source: Option<&SpaceSource>,
        boundary: Option<&BoundarySourcePair>,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        let n_nodes = start.len();
        let steps = setup.time().n_steps();
        let mut y = start.to_vec();
        let mut rhs = vec![0.0; n_nodes];
        let mut load_now = vec![0.0; n_nodes];
        let mut load_next = vec![0.0; n_nodes];
        let forced = source.is_some() || boundary.is_some();
        if forced {
            self.load(setup, 0, source, boundary, &mut load_now);
        }
        visit(0, &y);
        for k in 0..steps {
            tridiag_matvec(
                &self.explicit_sub,
                &self.explicit_diag,
                &self.explicit_sup,
                &y,
                &mut rhs,
            );
            if forced {
                self.load(setup, k + 1, source, boundary, &mut load_next);
                let half = 0.5 * self.dt;
                for i in 0..n_nodes {
                    rhs[i] += half * (load_now[i] + load_next[i]);
                }
                std::mem::swap(&mut load_now, &mut load_next);
            }
            self.implicit.solve_in_place(&mut rhs);
            std::mem::swap(&mut y, &mut rhs);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { step: k + 1 });
            }
            visit(k + 1, &y);
        }
        Ok(y)
    }
}

/// Snapshots `Y(t_k)` for `k = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ProductState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ProductState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Forward solver with its time-stepping matrices factorised once.
#[derive(Debug, Clone)]
pub struct ForwardSolver<'a> {
    setup: &'a ProblemSetup,
    stepper: Stepper,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(setup: &'a ProblemSetup) -> Result<Self> {
        Ok(Self {
            setup,
            stepper: Stepper::assemble(setup, FluxSign::Physical)?,
        })
    }

    pub fn setup(&self) -> &'a ProblemSetup {
        self.setup
    }

    pub(crate) fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    fn check_source(&self, f: &SpaceSource) -> Result<()> {
        ensure_len("source", self.setup.space().n_nodes(), f.len())
    }

    /// Full trajectory for source `f` with the setup's initial data and
    /// boundary sources.
    pub fn solve(&self, f: &SpaceSource) -> Result<Trajectory> {
        self.check_source(f)?;
        let mut states = Vec::with_capacity(self.setup.time().n_times());
        self.stepper.march(
            self.setup,
            self.setup.initial().values(),
            Some(f),
            self.setup.boundary_source(),
            |_, y| states.push(ProductState::from_nodes(y.to_vec())),
        )?;
        Ok(Trajectory { states })
    }

    /// `Y(T)` only, without storing the trajectory.
    pub fn final_state(&self, f: &SpaceSource) -> Result<ProductState> {
        self.check_source(f)?;
        let y = self.stepper.march(
            self.setup,
            self.setup.initial().values(),
            Some(f),
            self.setup.boundary_source(),
            |_, _| {},
        )?;
        Ok(ProductState::from_nodes(y))
    }

    /// `Ψf`: final state from zero initial data and zero boundary sources.
    pub fn response(&self, f: &SpaceSource) -> Result<ProductState> {
        self.check_source(f)?;
        let zero = vec![0.0; f.len()];
        let y = self.stepper.march(self.setup, &zero, Some(f), None, |_, _| {})?;
        Ok(ProductState::from_nodes(y))
    }

    /// Final state for arbitrary interior and boundary sources from zero
    /// initial data.
    pub fn response_general(&self, f: &SpaceSource, boundary: Option<&BoundarySourcePair>) -> Result<ProductState> {
        self.check_source(f)?;
        if let Some(g) = boundary {
            ensure_len("left boundary series", self.setup.time().n_times(), g.left.len())?;
            ensure_len("right boundary series", self.setup.time().n_times(), g.right.len())?;
        }
        let zero = vec![0.0; f.len()];
        let y = self.stepper.march(self.setup, &zero, Some(f), boundary, |_, _| {})?;
        Ok(ProductState::from_nodes(y))
    }
}

/// Convenience wrapper around [`ForwardSolver::solve`].
pub fn solve_forward(setup: &ProblemSetup, f: &SpaceSource) -> Result<Trajectory> {
    ForwardSolver::new(setup)?.solve(f)
}

/// `∫₀^ℓ y dx + y(0) + y(ℓ)` with the trapezoid rule.
pub fn conserved_quantity(state: &ProductState, grid: &SpatialGrid) -> Result<f64> {
    let one = ProductState::constant(grid, 1.0);
    product_inner(state, &one, grid)
}

/// Largest per-step defect of the balance
/// `Q(t_{k+1}) − Q(t_k) = ∫_{t_k}^{t_{k+1}} ∫₀^ℓ f r dx dt`, where
/// `Q = ∫ y + y(0) + y(ℓ)`, normalised by `max(1, max_k |∫ y(t_k) dx|)`.
///
/// Only meaningful without potentials or boundary sources.
pub fn conservation_residual(traj: &Trajectory, setup: &ProblemSetup, f: &SpaceSource) -> Result<f64> {
    if !setup.potentials_vanish() {
        return Err(Error::Precondition("conservation requires a = b = 0".into()));
    }
    if setup.boundary_source().is_some_and(|g| !g.is_zero()) {
        return Err(Error::Precondition(
            "conservation requires zero boundary sources".into(),
        ));
    }
    let grid = setup.space();
    ensure_len("trajectory", setup.time().n_times(), traj.len())?;
    ensure_len("source", grid.n_nodes(), f.len())?;

    let mut fr = vec![0.0; f.len()];
    let mut source_integral = |k: usize| -> Result<f64> {
        for ((o, fi), ri) in fr.iter_mut().zip(f.values()).zip(setup.modulation_at(k)) {
            *o = fi * ri;
        }
        space_inner(&fr, &vec![1.0; fr.len()], grid)
    };

    let one = vec![1.0; grid.n_nodes()];
    let mut scale = 1.0f64;
    for s in &traj.states {
        scale = scale.max(space_inner(s.values(), &one, grid)?.abs());
    }

    let dt = setup.time().dt();
    let mut worst = 0.0f64;
    let mut q_prev = conserved_quantity(&traj.states[0], grid)?;
    let mut s_prev = source_integral(0)?;
    for k in 0..setup.time().n_steps() {
        let q_next = conserved_quantity(&traj.states[k + 1], grid)?;
        let s_next = source_integral(k + 1)?;
        let defect = (q_next - q_prev) - 0.5 * dt * (s_prev + s_next);
        worst = worst.max(defect.abs());
        q_prev = q_next;
        s_prev = s_next;
    }
    Ok(worst / scale)
}

/// Both sides of the energy estimate
/// `max_t ‖Y(t;f₁) − Y(t;f₂)‖² ≤ e^{(1 + 2 max(‖a‖∞,‖b‖∞)) T} ‖(f₁ − f₂) r‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl StabilityGap {
    pub fn holds_with_slack(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack)
    }
}

/// Growth factor `e^{(1 + 2m)T}` of the energy estimate.
pub fn gronwall_factor(setup: &ProblemSetup) -> f64 {
    ((1.0 + 2.0 * setup.max_potential()) * setup.time().final_time()).exp()
}

pub fn stability_gap(setup: &ProblemSetup, f1: &SpaceSource, f2: &SpaceSource) -> Result<StabilityGap> {
    let solver = ForwardSolver::new(setup)?;
    let y1 = solver.solve(f1)?;
    let y2 = solver.solve(f2)?;
    let mut lhs = 0.0f64;
    for (a, b) in y1.states.iter().zip(&y2.states) {
        let diff = a.difference(b)?;
        lhs = lhs.max(product_inner(&diff, &diff, setup.space())?);
    }
    let df = f1.combine(1.0, f2, -1.0)?;
    let rhs = gronwall_factor(setup) * setup.source_norm_sq(&df, None)?;
    Ok(StabilityGap { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_setup(n: usize, m: usize) -> ProblemSetup {
        ProblemSetup::new(Grids::new(1.0, n, 1.0, m).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let setup = paper_setup(16, 8);
        let traj = solve_forward(&setup, &SpaceSource::zeros(setup.space())).unwrap();
        assert_eq!(traj.len(), 9);
        assert!(traj.states.iter().all(|s| s.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn constants_are_stationary() {
        let setup = paper_setup(16, 8);
        let c = 2.5;
        let setup = setup
            .clone()
            .with_initial(ProductState::constant(setup.space(), c))
            .unwrap();
        let traj = solve_forward(&setup, &SpaceSource::zeros(setup.space())).unwrap();
        assert_eq!(traj.states[0], *setup.initial());
        for s in &traj.states {
            for v in s.values() {
                assert!((v - c).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn initial_state_is_stored_exactly() {
        let setup = paper_setup(16, 8);
        let y0 = ProductState::sample(setup.space(), |x| (x * 7.0).sin());
        let setup = setup.with_initial(y0.clone()).unwrap();
        let traj = solve_forward(&setup, &SpaceSource::zeros(&SpatialGrid::new(1.0, 16).unwrap())).unwrap();
        assert_eq!(traj.states[0], y0);
    }

    #[test]
    fn conservation_holds_for_paper_example() {
        let setup = paper_setup(256, 512);
        let f = SpaceSource::sample(setup.space(), |x| x * (1.0 - x));
        let traj = solve_forward(&setup, &f).unwrap();
        assert!(conservation_residual(&traj, &setup, &f).unwrap() <= 1e-6);
    }

    #[test]
    fn conservation_of_constant_state() {
        let setup = paper_setup(32, 16);
        let setup = setup
            .clone()
            .with_initial(ProductState::constant(setup.space(), 3.0))
            .unwrap();
        let f = SpaceSource::zeros(setup.space());
        let traj = solve_forward(&setup, &f).unwrap();
        assert!(conservation_residual(&traj, &setup, &f).unwrap() <= 1e-10);
    }

    #[test]
    fn conservation_requires_vanishing_potentials() {
        let setup = paper_setup(16, 8).with_boundary_potentials(1.0, 0.0).unwrap();
        let f = SpaceSource::zeros(setup.space());
        let traj = solve_forward(&setup, &f).unwrap();
        assert!(matches!(
            conservation_residual(&traj, &setup, &f),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn wrong_source_length_is_rejected() {
        let setup = paper_setup(16, 8);
        let f = SpaceSource::zeros(&SpatialGrid::new(1.0, 8).unwrap());
        assert!(matches!(
            solve_forward(&setup, &f),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unstable_coefficients_report_the_step() {
        // f·r overflows on the first step
        let setup = paper_setup(8, 4).with_modulation(|_, _| 1e10).unwrap();
        let f = SpaceSource::sample(setup.space(), |_| 1e300);
        let err = solve_forward(&setup, &f).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 1 }), "{err}");
    }

    #[test]
    fn gronwall_multiplier_without_potentials() {
        let setup = paper_setup(16, 8);
        assert!((gronwall_factor(&setup) - std::f64::consts::E).abs() < 1e-15);
        let f = SpaceSource::sample(setup.space(), |x| x);
        let gap = stability_gap(&setup, &f, &f).unwrap();
        assert_eq!(gap.lhs, 0.0);
        assert_eq!(gap.rhs, 0.0);
    }

    #[test]
    fn stability_gap_for_paper_source() {
        let setup = paper_setup(128, 256);
        let f1 = SpaceSource::sample(setup.space(), |x| x * (1.0 - x));
        let gap = stability_gap(&setup, &f1, &SpaceSource::zeros(setup.space())).unwrap();
        assert!(gap.lhs > 0.0 && gap.lhs / gap.rhs < 1.0, "{gap:?}");
    }
}
