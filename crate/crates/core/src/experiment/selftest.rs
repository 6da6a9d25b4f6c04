//! Built-in verification suites behind `heatsrc selftest`.
//!
//! Tolerances that bound discretisation error are stated for the
//! 256-cell reference grid and scaled by `(256 / n_cells)²` on coarser
//! grids; round-off level checks are not scaled.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{adjoint_identity_gap_with, conserved_drift, AdjointSolver, TerminalResidual};
use crate::error::{Error, Result};
use crate::field::{l2_space_norm, product_inner, Grids, ProductState, SpaceSource};
use crate::forward::{conservation_residual, stability_gap, FluxSign, ForwardSolver, ProblemSetup};
use crate::landweber::{make_observation, rate_bound_check, run, LandweberConfig, NoiseMode, StepMode};
use crate::objective::{lipschitz_constant, Objective, TikhonovConfig};
use crate::verification::{gradient_fd_check, random_smooth, WentzellOracle};

pub const REFERENCE_CELLS: usize = 256;

/// Deliberate defects for checking that the suites notice them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Boundary flux sign flipped in the adjoint solver.
    AdjointSign,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint-sign" => Ok(Fault::AdjointSign),
            other => Err(Error::InvalidParameter(format!("unknown fault {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    pub n_cells: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            n_cells: REFERENCE_CELLS,
            n_steps: 2 * REFERENCE_CELLS,
            seed: 1,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {:<22} {}", self.name, self.detail)
    }
}

struct Context {
    setup: ProblemSetup,
    scale: f64,
    seed: u64,
    adjoint_flux: FluxSign,
}

impl Context {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn random_source(&self, rng: &mut ChaCha8Rng) -> Result<SpaceSource> {
        SpaceSource::new(self.setup.space(), random_smooth(self.setup.space(), rng))
    }

    fn parabolic(&self) -> SpaceSource {
        SpaceSource::sample(self.setup.space(), |x| x * (1.0 - x))
    }

    fn adjoint<'a>(&self, setup: &'a ProblemSetup) -> Result<AdjointSolver<'a>> {
        AdjointSolver::with_flux_sign(setup, self.adjoint_flux)
    }
}

type Suite = fn(&Context) -> Result<(bool, String)>;

const SUITES: [(&str, Suite); 13] = [
    ("field-quadrature", field_quadrature),
    ("forward-oracle", forward_oracle),
    ("forward-linearity", forward_linearity),
    ("forward-conservation", forward_conservation),
    ("stability-bound", stability_bound),
    ("adjoint-identity", adjoint_identity),
    ("adjoint-conservation", adjoint_conservation),
    ("gradient-fd", gradient_fd),
    ("monotonicity", monotonicity),
    ("lipschitz-bound", lipschitz_bound),
    ("landweber-descent", landweber_descent),
    ("rate-bound", rate_bound),
    ("determinism", determinism),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

pub fn run_selftest(opts: &SelftestOptions) -> Result<Vec<SuiteOutcome>> {
    let setup = ProblemSetup::new(Grids::new(1.0, opts.n_cells, 1.0, opts.n_steps)?);
    let ratio = REFERENCE_CELLS as f64 / opts.n_cells as f64;
    let ctx = Context {
        setup,
        scale: (ratio * ratio).max(1.0),
        seed: opts.seed,
        adjoint_flux: match opts.fault {
            Some(Fault::AdjointSign) => FluxSign::Flipped,
            None => FluxSign::Physical,
        },
    };
    Ok(SUITES
        .iter()
        .map(|(name, suite)| {
            let (passed, detail) = suite(&ctx).unwrap_or_else(|e| (false, format!("error: {e}")));
            SuiteOutcome { name, passed, detail }
        })
        .collect())
}

fn field_quadrature(ctx: &Context) -> Result<(bool, String)> {
    let grid = ctx.setup.space();
    let one = ProductState::constant(grid, 1.0);
    let three = product_inner(&one, &one, grid)?;
    let mut bump = ProductState::sample(grid, |x| x * (1.0 - x));
    let n = bump.len();
    bump.values_mut()[0] = 0.0;
    bump.values_mut()[n - 1] = 0.0;
    let err = (product_inner(&bump, &bump, grid)? - 1.0 / 30.0).abs();
    let sine = SpaceSource::sample(grid, |x| (std::f64::consts::PI * x).sin());
    let sine_err = (l2_space_norm(&sine, grid)? - 0.5f64.sqrt()).abs();
    let tol = 1e-5 * ctx.scale;
    Ok((
        (three - 3.0).abs() < 1e-12 && err < tol && sine_err < tol,
        format!(
            "|<1,1>-3| = {:.1e}, quadrature errors {err:.1e}, {sine_err:.1e} (tol {tol:.0e})",
            (three - 3.0).abs()
        ),
    ))
}

fn forward_oracle(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let got = ForwardSolver::new(setup)?.final_state(&ctx.parabolic())?;
    let want = ProductState::from_nodes(WentzellOracle::new(1.0, 1.0, 1.0)?.final_state(
        |x| x * (1.0 - x),
        0.0,
        0.0,
        &setup.space().nodes(),
    ));
    let err = got.difference(&want)?.norm(setup.space())? / want.norm(setup.space())?;
    let tol = 1e-4 * ctx.scale;
    Ok((err <= tol, format!("relative error {err:.2e} (tol {tol:.0e})")))
}

fn forward_linearity(ctx: &Context) -> Result<(bool, String)> {
    let mut rng = ctx.rng(1);
    let solver = ForwardSolver::new(&ctx.setup)?;
    let grid = ctx.setup.space();
    let f1 = ctx.random_source(&mut rng)?;
    let f2 = ctx.random_source(&mut rng)?;
    let combined = solver.response(&f1.combine(0.7, &f2, -1.3)?)?;
    let mut parts = solver.response(&f1)?.scaled(0.7);
    parts.add_scaled(-1.3, &solver.response(&f2)?)?;
    let err = combined.difference(&parts)?.norm(grid)? / parts.norm(grid)?;
    Ok((err <= 1e-10, format!("relative defect {err:.1e} (tol 1e-10)")))
}

fn forward_conservation(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let f = ctx.parabolic();
    let traj = ForwardSolver::new(setup)?.solve(&f)?;
    let residual = conservation_residual(&traj, setup, &f)?;
    let constant_setup = setup.clone().with_initial(ProductState::constant(setup.space(), 2.5))?;
    let zero = SpaceSource::zeros(setup.space());
    let constant = conservation_residual(
        &ForwardSolver::new(&constant_setup)?.solve(&zero)?,
        &constant_setup,
        &zero,
    )?;
    Ok((
        residual <= 1e-6 && constant <= 1e-10,
        format!("residual {residual:.1e} (tol 1e-6), constant state {constant:.1e} (tol 1e-10)"),
    ))
}

fn stability_bound(ctx: &Context) -> Result<(bool, String)> {
    let mut rng = ctx.rng(2);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let f1 = ctx.random_source(&mut rng)?;
        let f2 = ctx.random_source(&mut rng)?;
        let gap = stability_gap(&ctx.setup, &f1, &f2)?;
        worst = worst.max(gap.lhs / gap.rhs);
    }
    Ok((worst <= 1.05, format!("max lhs/rhs {worst:.3} over 5 pairs (tol 1.05)")))
}

fn adjoint_identity(ctx: &Context) -> Result<(bool, String)> {
    let mut rng = ctx.rng(3);
    let forward = ForwardSolver::new(&ctx.setup)?;
    let adjoint = ctx.adjoint(&ctx.setup)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let df = ctx.random_source(&mut rng)?;
        let w = ProductState::from_nodes(random_smooth(ctx.setup.space(), &mut rng));
        worst = worst.max(adjoint_identity_gap_with(&forward, &adjoint, &df, None, &w)?);
    }
    let tol = 1e-4 * ctx.scale;
    Ok((
        worst <= tol,
        format!("max gap {worst:.1e} over 5 pairs (tol {tol:.0e})"),
    ))
}

fn adjoint_conservation(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let data = ForwardSolver::new(setup)?.final_state(&ctx.parabolic())?;
    let phi = ctx
        .adjoint(setup)?
        .solve(&TerminalResidual::from_state(data.scaled(-1.0)))?;
    let drift = conserved_drift(&phi, setup.space())?;
    Ok((drift <= 1e-8, format!("relative drift {drift:.1e} (tol 1e-8)")))
}

fn example_objective<'a>(ctx: &Context, setup: &'a ProblemSetup, data: &'a ProductState) -> Result<Objective<'a>> {
    Objective::with_adjoint_flux(setup, data, TikhonovConfig::new(1e-6)?, ctx.adjoint_flux)
}

fn gradient_fd(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let obs = make_observation(setup, &ctx.parabolic(), 0.01, ctx.seed, NoiseMode::ZeroMean)?;
    let objective = example_objective(ctx, setup, &obs.data)?;
    let mut rng = ctx.rng(4);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let f = ctx.random_source(&mut rng)?;
        let v = ctx.random_source(&mut rng)?;
        worst = worst.max(gradient_fd_check(&objective, &f, &v)?.relative_error);
    }
    let tol = 1e-3 * ctx.scale;
    Ok((
        worst <= tol,
        format!("max relative error {worst:.1e} over 3 pairs (tol {tol:.0e})"),
    ))
}

fn monotonicity(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let obs = make_observation(setup, &ctx.parabolic(), 0.01, ctx.seed, NoiseMode::ZeroMean)?;
    let objective = example_objective(ctx, setup, &obs.data)?;
    let grid = setup.space();
    let mut rng = ctx.rng(5);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let f = ctx.random_source(&mut rng)?;
        let df = ctx.random_source(&mut rng)?;
        let g0 = objective.gradient(&f)?;
        let g1 = objective.gradient(&f.combine(1.0, &df, 1.0)?)?;
        let lhs = crate::field::space_inner(g1.values.combine(1.0, &g0.values, -1.0)?.values(), df.values(), grid)?;
        let dy = ForwardSolver::new(setup)?.response(&df)?;
        let rhs = product_inner(&dy, &dy, grid)? + 1e-6 * l2_space_norm(&df, grid)?.powi(2);
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    let tol = 1e-3 * ctx.scale;
    Ok((
        worst <= tol,
        format!("max relative gap {worst:.1e} over 3 pairs (tol {tol:.0e})"),
    ))
}

fn lipschitz_bound(ctx: &Context) -> Result<(bool, String)> {
    let setup = &ctx.setup;
    let data = ProductState::zeros(setup.space());
    let objective = Objective::with_adjoint_flux(setup, &data, TikhonovConfig::new(0.0)?, ctx.adjoint_flux)?;
    let bound = setup.time().final_time().sqrt() * lipschitz_constant(setup);
    let grid = setup.space();
    let mut rng = ctx.rng(6);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let f = ctx.random_source(&mut rng)?;
        let df = ctx.random_source(&mut rng)?;
        let g0 = objective.gradient(&f)?;
        let g1 = objective.gradient(&f.combine(1.0, &df, 1.0)?)?;
        let lhs = l2_space_norm(&g1.values.combine(1.0, &g0.values, -1.0)?, grid)?;
        let rhs = bound * setup.source_norm_sq(&df, None)?.sqrt();
        worst = worst.max(lhs / rhs);
    }
    Ok((
        worst <= 1.05,
        format!("max ratio to sqrt(T) L bound {worst:.3} over 5 pairs (tol 1.05)"),
    ))
}

fn example_run(ctx: &Context, step: StepMode, max_iter: usize) -> Result<crate::landweber::ReconstructionTrace> {
    let setup = &ctx.setup;
    let truth = ctx.parabolic();
    let obs = make_observation(setup, &truth, 0.01, ctx.seed, NoiseMode::Scalar)?;
    let mut cfg = LandweberConfig::new(1e-6);
    cfg.step = step;
    cfg.max_iter = max_iter;
    run(setup, &obs, &cfg, Some(&truth))
}

fn landweber_descent(ctx: &Context) -> Result<(bool, String)> {
    let trace = example_run(ctx, StepMode::Adaptive, 50)?;
    let ascent = trace.first_ascent();
    Ok((
        ascent.is_none(),
        format!(
            "{} iterations ({}), first ascent {:?}",
            trace.iterations(),
            trace.stop,
            ascent
        ),
    ))
}

fn rate_bound(ctx: &Context) -> Result<(bool, String)> {
    let lipschitz = lipschitz_constant(&ctx.setup);
    let trace = example_run(ctx, StepMode::Fixed(1.0 / lipschitz), 30)?;
    let report = rate_bound_check(&trace, lipschitz)?;
    Ok((
        report.passed(),
        format!(
            "{} rows, first failing row {:?}",
            report.rows.len(),
            report.first_failure()
        ),
    ))
}

fn determinism(ctx: &Context) -> Result<(bool, String)> {
    let a = example_run(ctx, StepMode::Adaptive, 10)?;
    let b = example_run(ctx, StepMode::Adaptive, 10)?;
    Ok((a == b, format!("{} rows compared", a.rows.len())))
}
