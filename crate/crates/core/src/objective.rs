//! Tikhonov functional
//!
//! ```text
//!   J_ε(f) = ½ ‖Y(T; f) − Y_T^δ‖² + (ε/2) ‖f‖²
//! ```
//!
//! on L²(0,ℓ) × ℝ², and its gradient
//! `J'_ε(f)(x) = ∫₀^T φ(t,x) r(t,x) dt + ε f(x)` from one forward and one
//! adjoint solve.

use log::warn;

use crate::adjoint::{AdjointSolver, TerminalResidual};
use crate::error::{ensure_len, Error, Result};
use crate::field::{l2_space_norm, product_inner, space_inner, BoundarySourcePair, ProductState, SpaceSource};
use crate::forward::{FluxSign, ForwardSolver, ProblemSetup};

/// Regularisation weight used by the first reconstruction example.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovConfig {
    pub epsilon: f64,
    /// Radius of the admissible set. Iterates outside it are reported, not
    /// projected.
    pub admissible_radius: Option<f64>,
}

impl Default for TikhonovConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            admissible_radius: None,
        }
    }
}

impl TikhonovConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            admissible_radius: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if let Some(r) = self.admissible_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "admissible radius must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// `J'_ε(f)` on the node grid. When the problem carries boundary sources the
/// boundary adjoint traces, which are the gradient with respect to those
/// sources, are returned as well.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub values: SpaceSource,
    pub general_boundary: Option<BoundarySourcePair>,
}

/// State of the functional at one source.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub final_state: ProductState,
    /// `½ ‖Y(T) − Y_T^δ‖²`
    pub misfit: f64,
    /// `J_ε(f)`
    pub value: f64,
}

pub struct Objective<'a> {
    forward: ForwardSolver<'a>,
    adjoint: AdjointSolver<'a>,
    data: &'a ProductState,
    cfg: TikhonovConfig,
}

impl<'a> Objective<'a> {
    pub fn new(setup: &'a ProblemSetup, data: &'a ProductState, cfg: TikhonovConfig) -> Result<Self> {
        cfg.validate()?;
        ensure_len("observation", setup.space().n_nodes(), data.len())?;
        let forward = ForwardSolver::new(setup)?;
        let adjoint = AdjointSolver::from_forward(&forward);
        Ok(Self {
            forward,
            adjoint,
            data,
            cfg,
        })
    }

    /// As [`Objective::new`] but with the adjoint assembled using `flux`.
    pub(crate) fn with_adjoint_flux(
        setup: &'a ProblemSetup,
        data: &'a ProductState,
        cfg: TikhonovConfig,
        flux: FluxSign,
    ) -> Result<Self> {
        let mut objective = Self::new(setup, data, cfg)?;
        if flux != FluxSign::Physical {
            objective.adjoint = AdjointSolver::with_flux_sign(setup, flux)?;
        }
        Ok(objective)
    }

    pub fn forward(&self) -> &ForwardSolver<'a> {
        &self.forward
    }

    pub fn config(&self) -> &TikhonovConfig {
        &self.cfg
    }

    pub fn setup(&self) -> &'a ProblemSetup {
        self.forward.setup()
    }

    pub fn evaluate_at(&self, f: &SpaceSource) -> Result<Evaluation> {
        let final_state = self.forward.final_state(f)?;
        self.evaluation_from_state(f, final_state)
    }

    pub(crate) fn evaluation_from_state(&self, f: &SpaceSource, final_state: ProductState) -> Result<Evaluation> {
        let grid = self.setup().space();
        let res = final_state.difference(self.data)?;
        let misfit = 0.5 * product_inner(&res, &res, grid)?;
        let reg = if self.cfg.epsilon > 0.0 {
            0.5 * self.cfg.epsilon * l2_space_norm(f, grid)?.powi(2)
        } else {
            0.0
        };
        if let Some(radius) = self.cfg.admissible_radius {
            let norm = l2_space_norm(f, grid)?;
            if norm > radius {
                warn!("source norm {norm:.4e} exceeds admissible radius {radius:.4e}");
            }
        }
        Ok(Evaluation {
            final_state,
            misfit,
            value: misfit + reg,
        })
    }

    pub fn value(&self, f: &SpaceSource) -> Result<f64> {
        Ok(self.evaluate_at(f)?.value)
    }

    /// Gradient at `f` given the forward solution already computed there.
    pub fn gradient_at(&self, f: &SpaceSource, eval: &Evaluation) -> Result<GradientField> {
        let res = TerminalResidual::new(&eval.final_state, self.data)?;
        let ints = self.adjoint.integrals(&res)?;
        let eps = self.cfg.epsilon;
        let values = ints
            .modulated
            .iter()
            .zip(f.values())
            .map(|(g, fi)| g + eps * fi)
            .collect();
        let general_boundary = self.setup().boundary_source().map(|_| ints.boundary_traces);
        Ok(GradientField {
            values: SpaceSource::new(self.setup().space(), values)?,
            general_boundary,
        })
    }

    pub fn gradient(&self, f: &SpaceSource) -> Result<GradientField> {
        let eval = self.evaluate_at(f)?;
        self.gradient_at(f, &eval)
    }
}

pub fn evaluate(setup: &ProblemSetup, f: &SpaceSource, data: &ProductState, cfg: TikhonovConfig) -> Result<f64> {
    Objective::new(setup, data, cfg)?.value(f)
}

pub fn gradient(
    setup: &ProblemSetup,
    f: &SpaceSource,
    data: &ProductState,
    cfg: TikhonovConfig,
) -> Result<GradientField> {
    Objective::new(setup, data, cfg)?.gradient(f)
}

/// `L = √(2T e^{(1 + 4m)T})` with `m = max(‖a‖∞, ‖b‖∞)`.
pub fn lipschitz_bound(final_time: f64, max_potential: f64) -> f64 {
    (2.0 * final_time * ((1.0 + 4.0 * max_potential) * final_time).exp()).sqrt()
}

/// Lipschitz constant of the unregularised gradient for this setup.
pub fn lipschitz_constant(setup: &ProblemSetup) -> f64 {
    lipschitz_bound(setup.time().final_time(), setup.max_potential())
}

/// Terms of the monotonicity identity
/// `⟨J'_ε(f + δf) − J'_ε(f), δf⟩ = ‖δY(T)‖² + ε ‖δf‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityGap {
    /// `⟨J'_ε(f + δf) − J'_ε(f), δf⟩_{L²(0,ℓ)}`
    pub lhs: f64,
    /// `‖δY(T)‖²` on L²(0,ℓ) × ℝ²
    pub output_energy: f64,
    /// `ε ‖δf‖²`
    pub regularization: f64,
}

impl MonotonicityGap {
    pub fn rhs(&self) -> f64 {
        self.output_energy + self.regularization
    }

    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs()).abs() / self.rhs().max(f64::MIN_POSITIVE)
    }
}

pub fn monotonicity_gap(
    setup: &ProblemSetup,
    f: &SpaceSource,
    df: &SpaceSource,
    data: &ProductState,
    cfg: TikhonovConfig,
) -> Result<MonotonicityGap> {
    let objective = Objective::new(setup, data, cfg)?;
    let grid = setup.space();
    let shifted = f.combine(1.0, df, 1.0)?;

    let e0 = objective.evaluate_at(f)?;
    let e1 = objective.evaluate_at(&shifted)?;
    let g0 = objective.gradient_at(f, &e0)?;
    let g1 = objective.gradient_at(&shifted, &e1)?;
    let dg = g1.values.combine(1.0, &g0.values, -1.0)?;
    let lhs = space_inner(dg.values(), df.values(), grid)?;

    let dy = e1.final_state.difference(&e0.final_state)?;
    let output_energy = product_inner(&dy, &dy, grid)?;
    let regularization = cfg.epsilon * l2_space_norm(df, grid)?.powi(2);
    Ok(MonotonicityGap {
        lhs,
        output_energy,
        regularization,
    })
}
