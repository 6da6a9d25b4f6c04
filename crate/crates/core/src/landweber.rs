//! Landweber iteration `f_{k+1} = f_k − α_k J'_ε(f_k)` with the relaxation
//! parameter `α_k = ‖p_k‖² / ‖Ψ p_k‖²`, the noisy-observation model and the
//! error metrics used to report reconstructions.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::field::{l2_space_norm, product_inner, ProductState, SpaceSource};
use crate::forward::{ForwardSolver, ProblemSetup};
use crate::objective::{Evaluation, Objective, TikhonovConfig};

pub const DEFAULT_MAX_ITER: usize = 1000;

/// Iteration stops when `J_k − J_{k+1} < STAGNATION_TOL · J_k`.
pub const STAGNATION_TOL: f64 = 1e-14;

/// How the multiplicative noise factor `ξ` is drawn in
/// `Y_T^δ = Y_T + p ‖Y_T‖ ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Independent uniform[−1, 1] per node.
    #[default]
    ZeroMean,
    /// Independent uniform[0, 1] per node.
    Paper,
    /// One uniform[0, 1] draw shared by every node.
    Scalar,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::ZeroMean => "zeromean",
            NoiseMode::Paper => "paper",
            NoiseMode::Scalar => "scalar",
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeromean" => Ok(NoiseMode::ZeroMean),
            "paper" => Ok(NoiseMode::Paper),
            "scalar" => Ok(NoiseMode::Scalar),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise mode {other:?} (expected zeromean, paper or scalar)"
            ))),
        }
    }
}

/// Final-time measurement together with the noise-free output it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub data: ProductState,
    pub clean: ProductState,
    pub noise_pct: f64,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl Observation {
    /// Wraps exact data with no noise.
    pub fn exact(clean: ProductState) -> Self {
        Self {
            data: clean.clone(),
            clean,
            noise_pct: 0.0,
            seed: 0,
            mode: NoiseMode::default(),
        }
    }
}

pub fn make_observation(
    setup: &ProblemSetup,
    f_true: &SpaceSource,
    noise_pct: f64,
    seed: u64,
    mode: NoiseMode,
) -> Result<Observation> {
    if !(0.0..=1.0).contains(&noise_pct) {
        return Err(Error::InvalidParameter(format!(
            "noise level must lie in [0, 1], got {noise_pct}"
        )));
    }
    let clean = ForwardSolver::new(setup)?.final_state(f_true)?;
    let mut data = clean.clone();
    if noise_pct > 0.0 {
        let amplitude = noise_pct * clean.norm(setup.space())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match mode {
            NoiseMode::ZeroMean => {
                for v in data.values_mut() {
                    *v += amplitude * rng.random_range(-1.0..=1.0);
                }
            }
            NoiseMode::Paper => {
                for v in data.values_mut() {
                    *v += amplitude * rng.random::<f64>();
                }
            }
            NoiseMode::Scalar => {
                let shift = amplitude * rng.random::<f64>();
                for v in data.values_mut() {
                    *v += shift;
                }
            }
        }
    }
    Ok(Observation {
        data,
        clean,
        noise_pct,
        seed,
        mode,
    })
}

fn alpha_from_response(setup: &ProblemSetup, direction: &SpaceSource, response: &ProductState) -> Result<f64> {
    let grid = setup.space();
    let p_sq = l2_space_norm(direction, grid)?.powi(2);
    if p_sq == 0.0 {
        return Err(Error::Precondition(
            "relaxation parameter needs a nonzero direction".into(),
        ));
    }
    let psi_sq = product_inner(response, response, grid)?;
    if psi_sq == 0.0 {
        return Err(Error::NullSpaceDirection { norm: p_sq.sqrt() });
    }
    Ok(p_sq / psi_sq)
}

/// `α = ‖p‖² / ‖Ψ p‖²`.
pub fn relaxation_alpha(setup: &ProblemSetup, direction: &SpaceSource) -> Result<f64> {
    let response = ForwardSolver::new(setup)?.response(direction)?;
    alpha_from_response(setup, direction, &response)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepMode {
    /// `α_k = ‖p_k‖² / ‖Ψ p_k‖²`
    #[default]
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberConfig {
    /// Starting iterate; `None` starts from zero.
    pub initial_iterate: Option<SpaceSource>,
    /// Iteration stops once `J_ε(f_k)` drops below this value.
    pub stop_threshold: f64,
    pub max_iter: usize,
    pub step: StepMode,
    pub tikhonov: TikhonovConfig,
}

impl LandweberConfig {
    /// Zero start, adaptive steps, and `ε` used both as regulariser and
    /// stopping threshold.
    pub fn new(epsilon: f64) -> Self {
        Self {
            initial_iterate: None,
            stop_threshold: epsilon,
            max_iter: DEFAULT_MAX_ITER,
            step: StepMode::Adaptive,
            tikhonov: TikhonovConfig {
                epsilon,
                admissible_radius: None,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tikhonov.validate()?;
        if !(self.stop_threshold.is_finite() && self.stop_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stopping threshold must be positive, got {}",
                self.stop_threshold
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if let StepMode::Fixed(alpha) = self.step {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "fixed step must be positive, got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Threshold,
    Cap,
    Stagnation,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Threshold => "threshold",
            StopReason::Cap => "cap",
            StopReason::Stagnation => "stagnation",
        })
    }
}

/// State of iterate `f_k`. `alpha`, `grad_norm` and `step_norm` describe
/// the step taken from `f_k` and are absent on the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub alpha: Option<f64>,
    /// `J_ε(f_k)`
    pub objective: f64,
    /// `‖Y(T; f_k) − Y_T‖²` against the noise-free output.
    pub output_error: f64,
    /// `‖f − f_k‖` when the true source is known.
    pub source_error: Option<f64>,
    pub grad_norm: Option<f64>,
    /// `‖f_{k+1} − f_k‖`
    pub step_norm: Option<f64>,
    /// `‖f_k − f_final‖`
    pub distance_to_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionTrace {
    pub rows: Vec<TraceRow>,
    pub final_iterate: SpaceSource,
    pub stop: StopReason,
    pub step: StepMode,
}

impl ReconstructionTrace {
    /// Number of updates performed.
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least one row")
    }

    /// Index of the first row whose objective exceeds its predecessor's.
    pub fn first_ascent(&self) -> Option<usize> {
        self.rows
            .windows(2)
            .position(|w| w[1].objective > w[0].objective)
            .map(|i| i + 1)
    }
}

/// `e = ‖Y(T; f_k) − Y_T‖²` and `E = ‖f − f_k‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub output_error: f64,
    pub source_error: Option<f64>,
}

pub fn error_metrics(
    setup: &ProblemSetup,
    iterate: &SpaceSource,
    truth: Option<&SpaceSource>,
    clean: &ProductState,
) -> Result<ErrorMetrics> {
    let state = ForwardSolver::new(setup)?.final_state(iterate)?;
    metrics_from_state(setup, iterate, &state, truth, clean)
}

fn metrics_from_state(
    setup: &ProblemSetup,
    iterate: &SpaceSource,
    state: &ProductState,
    truth: Option<&SpaceSource>,
    clean: &ProductState,
) -> Result<ErrorMetrics> {
    let grid = setup.space();
    let diff = state.difference(clean)?;
    let output_error = product_inner(&diff, &diff, grid)?;
    let source_error = match truth {
        Some(t) => Some(l2_space_norm(&iterate.combine(1.0, t, -1.0)?, grid)?),
        None => None,
    };
    Ok(ErrorMetrics {
        output_error,
        source_error,
    })
}

struct Runner<'a> {
    objective: Objective<'a>,
    obs: &'a Observation,
    truth: Option<&'a SpaceSource>,
    rows: Vec<TraceRow>,
    iterates: Vec<SpaceSource>,
}

impl Runner<'_> {
    fn record(&mut self, k: usize, f: &SpaceSource, eval: &Evaluation, step: Option<(f64, f64, f64)>) -> Result<()> {
        let setup = self.objective.setup();
        let m = metrics_from_state(setup, f, &eval.final_state, self.truth, &self.obs.clean)?;
        if let Some(radius) = self.objective.config().admissible_radius {
            let norm = l2_space_norm(f, setup.space())?;
            if norm > radius {
                warn!("iterate {k} has norm {norm:.4e} beyond the admissible radius {radius:.4e}");
            }
        }
        self.rows.push(TraceRow {
            k,
            alpha: step.map(|s| s.0),
            objective: eval.value,
            output_error: m.output_error,
            source_error: m.source_error,
            grad_norm: step.map(|s| s.1),
            step_norm: step.map(|s| s.2),
            distance_to_final: 0.0,
        });
        self.iterates.push(f.clone());
        Ok(())
    }
}

/// Runs the iteration until `J_ε(f_k) < e_J`, the iteration cap, or
/// stagnation. Each update costs one adjoint and one forward solve; the
/// state at the new iterate follows by linearity from `Ψ p_k`.
pub fn run(
    setup: &ProblemSetup,
    obs: &Observation,
    cfg: &LandweberConfig,
    truth: Option<&SpaceSource>,
) -> Result<ReconstructionTrace> {
    cfg.validate()?;
    let grid = setup.space();
    if let Some(t) = truth {
        ensure_len("true source", grid.n_nodes(), t.len())?;
    }
    ensure_len("clean observation", grid.n_nodes(), obs.clean.len())?;
    let mut f = match &cfg.initial_iterate {
        Some(f0) => {
            ensure_len("initial iterate", grid.n_nodes(), f0.len())?;
            f0.clone()
        }
        None => SpaceSource::zeros(grid),
    };
    let mut runner = Runner {
        objective: Objective::new(setup, &obs.data, cfg.tikhonov)?,
        obs,
        truth,
        rows: Vec::new(),
        iterates: Vec::new(),
    };

    let mut eval = runner.objective.evaluate_at(&f).map_err(|e| e.at_iteration(0))?;
    let mut k = 0;
    let stop = loop {
        if eval.value < cfg.stop_threshold {
            runner.record(k, &f, &eval, None)?;
            break StopReason::Threshold;
        }
        if k == cfg.max_iter {
            runner.record(k, &f, &eval, None)?;
            break StopReason::Cap;
        }
        let step = (|| -> Result<Option<_>> {
            let direction = runner.objective.gradient_at(&f, &eval)?.values;
            let grad_norm = l2_space_norm(&direction, grid)?;
            if grad_norm == 0.0 {
                return Ok(None);
            }
            let response = runner.objective.forward().response(&direction)?;
            let alpha = match cfg.step {
                StepMode::Adaptive => match alpha_from_response(setup, &direction, &response) {
                    Ok(a) => a,
                    Err(Error::NullSpaceDirection { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                },
                StepMode::Fixed(a) => a,
            };
            Ok(Some((direction, grad_norm, response, alpha)))
        })()
        .map_err(|e| e.at_iteration(k))?;
        let Some((direction, grad_norm, response, alpha)) = step else {
            runner.record(k, &f, &eval, None)?;
            break StopReason::Stagnation;
        };

        runner.record(k, &f, &eval, Some((alpha, grad_norm, alpha * grad_norm)))?;
        let next_f = f.combine(1.0, &direction, -alpha)?;
        let mut next_state = eval.final_state.clone();
        next_state.add_scaled(-alpha, &response)?;
        if !next_state.is_finite() || next_f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: setup.time().n_steps(),
            }
            .at_iteration(k + 1));
        }
        let next = runner.objective.evaluation_from_state(&next_f, next_state)?;
        debug!("iteration {}: alpha {alpha:.6e}, J {:.6e}", k + 1, next.value);
        let decrease = eval.value - next.value;
        let stagnated = decrease < STAGNATION_TOL * eval.value && next.value >= cfg.stop_threshold;
        f = next_f;
        eval = next;
        k += 1;
        if stagnated {
            runner.record(k, &f, &eval, None)?;
            break StopReason::Stagnation;
        }
    };

    let Runner { mut rows, iterates, .. } = runner;
    for (row, iterate) in rows.iter_mut().zip(&iterates) {
        row.distance_to_final = l2_space_norm(&iterate.combine(1.0, &f, -1.0)?, grid)?;
    }
    Ok(ReconstructionTrace {
        rows,
        final_iterate: f,
        stop,
        step: cfg.step,
    })
}

/// Per-row outcome of the fixed-step rate check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub k: usize,
    /// `‖f_{k+1} − f_k‖² ≤ (2/L) (J(f_k) − J(f_{k+1}))`; vacuous on the last row.
    pub step_bound: bool,
    /// `0 ≤ J(f_k) − J_* ≤ 2 L β² / k`; vacuous at `k = 0`.
    pub rate_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub lipschitz: f64,
    /// Surrogate for `β`: the largest distance of an iterate to the final one.
    pub beta: f64,
    /// Surrogate for `J_*`: the smallest objective along the trace.
    pub optimum: f64,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.rows.iter().position(|r| !(r.step_bound && r.rate_bound))
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }
}

/// Checks the descent and `O(1/k)` rate inequalities on a fixed-step trace.
/// Inequalities are tested with a relative round-off allowance.
pub fn rate_bound_check(trace: &ReconstructionTrace, lipschitz: f64) -> Result<RateReport> {
    if !matches!(trace.step, StepMode::Fixed(_)) {
        return Err(Error::Precondition("rate check needs a fixed-step trace".into()));
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let slack = |scale: f64| 1e-12 * scale.abs().max(f64::MIN_POSITIVE);
    let beta = trace.rows.iter().map(|r| r.distance_to_final).fold(0.0, f64::max);
    let optimum = trace.rows.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let rows = trace
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let step_bound = match (trace.rows.get(i + 1), row.step_norm) {
                (Some(next), Some(step)) => {
                    let rhs = 2.0 / lipschitz * (row.objective - next.objective);
                    step * step <= rhs + slack(row.objective)
                }
                (Some(next), None) => next.objective <= row.objective + slack(row.objective),
                (None, _) => true,
            };
            let rate_bound = if row.k == 0 {
                true
            } else {
                let gap = row.objective - optimum;
                gap >= -slack(row.objective)
                    && gap <= 2.0 * lipschitz * beta * beta / row.k as f64 + slack(row.objective)
            };
            RateRow {
                k: row.k,
                step_bound,
                rate_bound,
            }
        })
        .collect();
    Ok(RateReport {
        lipschitz,
        beta,
        optimum,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grids;
    use crate::objective::lipschitz_constant;

    fn setup(n: usize, m: usize) -> ProblemSetup {
        ProblemSetup::new(Grids::new(1.0, n, 1.0, m).unwrap())
    }

    fn parabolic(s: &ProblemSetup) -> SpaceSource {
        SpaceSource::sample(s.space(), |x| x * (1.0 - x))
    }

    #[test]
    fn noise_free_observation_is_exact() {
        let s = setup(32, 32);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.0, 7, NoiseMode::ZeroMean).unwrap();
        assert_eq!(obs.data, obs.clean);
        assert_eq!(obs.clean, ForwardSolver::new(&s).unwrap().final_state(&f).unwrap());
    }

    #[test]
    fn observations_are_reproducible() {
        let s = setup(32, 32);
        let f = parabolic(&s);
        for mode in [NoiseMode::ZeroMean, NoiseMode::Paper, NoiseMode::Scalar] {
            let a = make_observation(&s, &f, 0.03, 11, mode).unwrap();
            let b = make_observation(&s, &f, 0.03, 11, mode).unwrap();
            assert_eq!(a, b);
            let c = make_observation(&s, &f, 0.03, 12, mode).unwrap();
            assert_ne!(a.data, c.data);
        }
    }

    #[test]
    fn noise_respects_support_of_each_mode() {
        let s = setup(64, 32);
        let f = parabolic(&s);
        let p = 0.05;
        let amp = p * ForwardSolver::new(&s)
            .unwrap()
            .final_state(&f)
            .unwrap()
            .norm(s.space())
            .unwrap();
        let zm = make_observation(&s, &f, p, 3, NoiseMode::ZeroMean).unwrap();
        let noise = zm.data.difference(&zm.clean).unwrap();
        assert!(noise.values().iter().all(|v| v.abs() <= amp));
        assert!(noise.values().iter().any(|v| *v < 0.0));
        let pl = make_observation(&s, &f, p, 3, NoiseMode::Paper).unwrap();
        let noise = pl.data.difference(&pl.clean).unwrap();
        assert!(noise.values().iter().all(|v| (0.0..=amp).contains(v)));
        let sc = make_observation(&s, &f, p, 3, NoiseMode::Scalar).unwrap();
        let noise = sc.data.difference(&sc.clean).unwrap();
        let first = noise.values()[0];
        assert!(noise.values().iter().all(|v| (v - first).abs() < 1e-15));
    }

    #[test]
    fn noise_level_outside_unit_interval_is_rejected() {
        let s = setup(16, 8);
        let f = parabolic(&s);
        assert!(make_observation(&s, &f, 1.5, 0, NoiseMode::ZeroMean).is_err());
        assert!(make_observation(&s, &f, -0.1, 0, NoiseMode::ZeroMean).is_err());
    }

    #[test]
    fn noise_mode_round_trips_through_strings() {
        for mode in [NoiseMode::ZeroMean, NoiseMode::Paper, NoiseMode::Scalar] {
            assert_eq!(mode.to_string().parse::<NoiseMode>().unwrap(), mode);
        }
        assert!("gauss".parse::<NoiseMode>().is_err());
    }

    #[test]
    fn relaxation_alpha_is_scale_invariant() {
        let s = setup(32, 64);
        let p = SpaceSource::sample(s.space(), |x| (x - 0.3).powi(2));
        let a = relaxation_alpha(&s, &p).unwrap();
        let b = relaxation_alpha(&s, &p.scaled(-7.5)).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        assert!(relaxation_alpha(&s, &SpaceSource::zeros(s.space())).is_err());
    }

    #[test]
    fn start_at_truth_stops_immediately() {
        let s = setup(32, 64);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.0, 0, NoiseMode::ZeroMean).unwrap();
        let mut cfg = LandweberConfig::new(1e-6);
        cfg.tikhonov.epsilon = 0.0;
        cfg.initial_iterate = Some(f.clone());
        let trace = run(&s, &obs, &cfg, Some(&f)).unwrap();
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.stop, StopReason::Threshold);
        assert_eq!(trace.rows[0].objective, 0.0);
        assert_eq!(trace.rows[0].source_error, Some(0.0));
        assert_eq!(trace.final_iterate, f);
    }

    #[test]
    fn iteration_cap_is_honoured() {
        let s = setup(32, 64);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.0, 0, NoiseMode::ZeroMean).unwrap();
        let mut cfg = LandweberConfig::new(1e-30);
        cfg.max_iter = 3;
        let trace = run(&s, &obs, &cfg, Some(&f)).unwrap();
        assert_eq!(trace.stop, StopReason::Cap);
        assert_eq!(trace.rows.len(), 4);
        assert!(trace.last().alpha.is_none());
        assert!(trace.rows[..3].iter().all(|r| r.alpha.is_some()));
        assert_eq!(trace.first_ascent(), None);
        assert_eq!(trace.last().distance_to_final, 0.0);
    }

    #[test]
    fn linear_state_update_matches_direct_solve() {
        let s = setup(32, 64);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.02, 5, NoiseMode::ZeroMean).unwrap();
        let mut cfg = LandweberConfig::new(1e-30);
        cfg.max_iter = 4;
        let trace = run(&s, &obs, &cfg, Some(&f)).unwrap();
        let direct = Objective::new(&s, &obs.data, cfg.tikhonov)
            .unwrap()
            .value(&trace.final_iterate)
            .unwrap();
        let last = trace.last().objective;
        assert!(
            (direct - last).abs() <= 1e-12 * direct.max(1e-300),
            "{direct} vs {last}"
        );
        let m = error_metrics(&s, &trace.final_iterate, Some(&f), &obs.clean).unwrap();
        assert!((m.output_error - trace.last().output_error).abs() <= 1e-10 * m.output_error);
    }

    #[test]
    fn zero_iterate_output_error_is_data_energy() {
        let s = setup(32, 64);
        let f = parabolic(&s);
        let clean = ForwardSolver::new(&s).unwrap().final_state(&f).unwrap();
        let m = error_metrics(&s, &SpaceSource::zeros(s.space()), Some(&f), &clean).unwrap();
        let energy = product_inner(&clean, &clean, s.space()).unwrap();
        assert!((m.output_error - energy).abs() <= 1e-14 * energy);
        assert_eq!(m.source_error, Some(l2_space_norm(&f, s.space()).unwrap()));
    }

    #[test]
    fn rate_check_rejects_adaptive_traces() {
        let s = setup(16, 16);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.0, 0, NoiseMode::ZeroMean).unwrap();
        let mut cfg = LandweberConfig::new(1e-30);
        cfg.max_iter = 1;
        let trace = run(&s, &obs, &cfg, None).unwrap();
        assert!(matches!(rate_bound_check(&trace, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn fixed_step_run_satisfies_rate_bounds() {
        let s = setup(32, 64);
        let f = parabolic(&s);
        let obs = make_observation(&s, &f, 0.01, 1, NoiseMode::ZeroMean).unwrap();
        let l = lipschitz_constant(&s);
        let mut cfg = LandweberConfig::new(1e-6);
        cfg.step = StepMode::Fixed(1.0 / l);
        cfg.max_iter = 20;
        let trace = run(&s, &obs, &cfg, Some(&f)).unwrap();
        let report = rate_bound_check(&trace, l).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn synthetic_ascent_is_reported_with_its_row() {
        let s = setup(8, 4);
        let row = |k: usize, j: f64| TraceRow {
            k,
            alpha: Some(0.1),
            objective: j,
            output_error: 0.0,
            source_error: None,
            grad_norm: Some(1.0),
            step_norm: Some(0.0),
            distance_to_final: 0.0,
        };
        let trace = ReconstructionTrace {
            rows: vec![row(0, 1.0), row(1, 0.5), row(2, 0.7), row(3, 0.6)],
            final_iterate: SpaceSource::zeros(s.space()),
            stop: StopReason::Cap,
            step: StepMode::Fixed(0.1),
        };
        let report = rate_bound_check(&trace, 2.0).unwrap();
        assert_eq!(report.first_failure(), Some(1));
        assert_eq!(trace.first_ascent(), Some(2));

        let single = ReconstructionTrace {
            rows: vec![row(0, 1.0)],
            ..trace
        };
        assert!(rate_bound_check(&single, 2.0).unwrap().passed());
    }
}
