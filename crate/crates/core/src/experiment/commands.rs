use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::adjoint::{adjoint_identity_gap_with, AdjointSolver};
use crate::artifacts::{
    format_f64, write_csv, write_gradient_csv, write_recovered_csv, write_space_csv, write_table_csv, write_trace_csv,
    write_trajectory_csv,
};
use crate::error::{Error, Result};
use crate::field::{Grids, ProductState, SpaceSource};
use crate::forward::ForwardSolver;
use crate::landweber::{make_observation, run, ReconstructionTrace};
use crate::objective::{GradientField, Objective, TikhonovConfig};
use crate::verification::{gradient_fd_check, pairwise_orders};

/// Number of `k ≥ 1` rows exported to `table1.csv`.
pub const TABLE_ROWS: usize = 5;

pub const SUMMARY_HEADER: [&str; 6] = ["p", "stop_iteration", "stop_reason", "J", "e", "E"];
pub const REFINE_HEADER: [&str; 5] = ["quantity", "n_cells", "n_steps", "error", "order"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<PathBuf>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct ManifestBuilder {
    command: &'static str,
    config_hash: String,
    started_unix: f64,
    artifacts: Vec<PathBuf>,
}

impl ManifestBuilder {
    fn start(command: &'static str, cfg: &ExperimentConfig, out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut builder = Self {
            command,
            config_hash: cfg.hash()?,
            started_unix: unix_now(),
            artifacts: Vec::new(),
        };
        let config_path = out.join("config.toml");
        std::fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
        builder.artifacts.push(config_path);
        Ok(builder)
    }

    fn finish(self, out: &Path) -> Result<RunManifest> {
        let path = out.join(format!("manifest_{}.json", self.command));
        let mut manifest = RunManifest {
            command: self.command.to_owned(),
            config_hash: self.config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            artifacts: self.artifacts,
        };
        manifest.artifacts.push(path.clone());
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Writes the trajectory for the configured true source to
/// `trajectory.csv` and its final state to `final_time.csv`.
pub fn cmd_forward(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let mut manifest = ManifestBuilder::start("forward", cfg, out)?;
    let setup = cfg.build_setup()?;
    let f = cfg.truth(setup.space())?;
    let traj = ForwardSolver::new(&setup)?.solve(&f)?;

    let path = out.join("trajectory.csv");
    write_trajectory_csv(&path, setup.grids(), &traj.states)?;
    manifest.artifacts.push(path);
    let path = out.join("final_time.csv");
    write_space_csv(&path, setup.space(), traj.final_state().values())?;
    manifest.artifacts.push(path);
    manifest.finish(out)
}

/// Percent label used in file names: `0.03` becomes `3`.
pub fn percent_label(p: f64) -> String {
    let pct = (p * 100.0 * 1e6).round() / 1e6;
    format!("{pct}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLevelResult {
    pub noise_pct: f64,
    pub trace: ReconstructionTrace,
    /// Gradient of the functional at the final iterate.
    pub gradient: GradientField,
}

/// Runs one reconstruction per noise level (in parallel) and writes
/// `recovered_p<P>.csv`, `trace_p<P>.csv`, `gradient_p<P>.csv`, `summary.csv`, and `table1.csv`
/// when the noise-free level is present.
pub fn cmd_reconstruct(cfg: &ExperimentConfig, out: &Path) -> Result<(RunManifest, Vec<NoiseLevelResult>)> {
    let mut manifest = ManifestBuilder::start("reconstruct", cfg, out)?;
    let setup = cfg.build_setup()?;
    let truth = cfg.truth(setup.space())?;
    let lw = cfg.landweber(&setup)?;

    let results: Vec<NoiseLevelResult> = cfg
        .noise
        .levels
        .par_iter()
        .map(|&p| {
            let obs = make_observation(&setup, &truth, p, cfg.noise.seed, cfg.noise.mode)?;
            let trace = run(&setup, &obs, &lw, Some(&truth))?;
            let gradient = Objective::new(&setup, &obs.data, lw.tikhonov)?.gradient(&trace.final_iterate)?;
            info!(
                "p = {}%: stopped at k = {} ({}), E = {:.4e}",
                percent_label(p),
                trace.iterations(),
                trace.stop,
                trace.last().source_error.unwrap_or(f64::NAN)
            );
            Ok(NoiseLevelResult {
                noise_pct: p,
                trace,
                gradient,
            })
        })
        .collect::<Result<_>>()?;

    for r in &results {
        let label = percent_label(r.noise_pct);
        let path = out.join(format!("recovered_p{label}.csv"));
        write_recovered_csv(&path, setup.space(), Some(&truth), &r.trace.final_iterate)?;
        manifest.artifacts.push(path);
        let path = out.join(format!("trace_p{label}.csv"));
        write_trace_csv(&path, &r.trace)?;
        manifest.artifacts.push(path);
        let path = out.join(format!("gradient_p{label}.csv"));
        write_gradient_csv(&path, setup.space(), &r.gradient)?;
        manifest.artifacts.push(path);
    }
    if let Some(clean) = results.iter().find(|r| r.noise_pct == 0.0) {
        let path = out.join("table1.csv");
        write_table_csv(&path, &clean.trace, TABLE_ROWS)?;
        manifest.artifacts.push(path);
    }
    let path = out.join("summary.csv");
    write_csv(
        &path,
        &SUMMARY_HEADER,
        results.iter().map(|r| {
            let last = r.trace.last();
            [
                format_f64(r.noise_pct),
                r.trace.iterations().to_string(),
                r.trace.stop.to_string(),
                format_f64(last.objective),
                format_f64(last.output_error),
                last.source_error.map(format_f64).unwrap_or_default(),
            ]
        }),
    )?;
    manifest.artifacts.push(path);
    Ok((manifest.finish(out)?, results))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLevel {
    pub n_cells: usize,
    pub n_steps: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSeries {
    pub quantity: &'static str,
    pub levels: Vec<RefinementLevel>,
    /// Orders between consecutive levels; `None` at the round-off floor.
    pub orders: Vec<Option<f64>>,
}

fn series(quantity: &'static str, levels: Vec<RefinementLevel>) -> RefinementSeries {
    let errors: Vec<f64> = levels.iter().map(|l| l.error).collect();
    RefinementSeries {
        quantity,
        orders: pairwise_orders(&errors),
        levels,
    }
}

/// Refinement study over `levels` grids, starting at `base` and halving
/// both steps each time. Reports
/// - `forward`: `‖Y_h(T) − Y_{h/2}(T)‖ / ‖Y_{h/2}(T)‖` on the coarse nodes,
/// - `adjoint_identity`: the duality gap for the true source against a fixed
///   smooth terminal state,
/// - `gradient_fd`: the relative adjoint/finite-difference discrepancy of the
///   functional at half the true source along a fixed direction.
pub fn refinement_study(cfg: &ExperimentConfig, base: Grids, levels: usize) -> Result<Vec<RefinementSeries>> {
    let mut grids = vec![base];
    for _ in 0..levels {
        let next = grids.last().expect("nonempty").refined();
        grids.push(next);
    }

    let finals: Vec<ProductState> = grids
        .par_iter()
        .map(|g| {
            let setup = cfg.build_setup_on(*g)?;
            let f = cfg.truth(setup.space())?;
            ForwardSolver::new(&setup)?.final_state(&f)
        })
        .collect::<Result<_>>()?;
    let forward: Vec<RefinementLevel> = (0..levels)
        .map(|i| {
            let coarse = &finals[i];
            let fine = &finals[i + 1];
            let restricted = ProductState::from_nodes(fine.values().iter().step_by(2).copied().collect());
            let space = &grids[i].space;
            let err = coarse.difference(&restricted)?.norm(space)? / restricted.norm(space)?.max(f64::MIN_POSITIVE);
            Ok(RefinementLevel {
                n_cells: grids[i].space.n_cells(),
                n_steps: grids[i].time.n_steps(),
                error: err,
            })
        })
        .collect::<Result<_>>()?;

    let per_level: Vec<(RefinementLevel, RefinementLevel)> = grids[..levels]
        .par_iter()
        .map(|g| {
            let setup = cfg.build_setup_on(*g)?.homogeneous();
            let space = setup.space();
            let ell = space.ell();
            let truth = cfg.truth(space)?;
            let w = ProductState::sample(space, |x| (std::f64::consts::PI * x / ell).cos() + x / ell);
            let forward = ForwardSolver::new(&setup)?;
            let adjoint = AdjointSolver::from_forward(&forward);
            let gap = adjoint_identity_gap_with(&forward, &adjoint, &truth, None, &w)?;

            let data = forward.final_state(&truth)?;
            let objective = Objective::new(&setup, &data, TikhonovConfig::new(cfg.solver.epsilon)?)?;
            let direction = SpaceSource::sample(space, |x| (2.0 * std::f64::consts::PI * x / ell).sin() + 0.5);
            let fd = gradient_fd_check(&objective, &truth.scaled(0.5), &direction)?;
            let level = |error| RefinementLevel {
                n_cells: g.space.n_cells(),
                n_steps: g.time.n_steps(),
                error,
            };
            Ok((level(gap), level(fd.relative_error)))
        })
        .collect::<Result<_>>()?;
    let (identity, fd): (Vec<_>, Vec<_>) = per_level.into_iter().unzip();

    Ok(vec![
        series("forward", forward),
        series("adjoint_identity", identity),
        series("gradient_fd", fd),
    ])
}

/// Runs [`refinement_study`] and writes `refine.csv`.
pub fn cmd_refine(
    cfg: &ExperimentConfig,
    out: &Path,
    base: Grids,
    levels: usize,
) -> Result<(RunManifest, Vec<RefinementSeries>)> {
    let mut manifest = ManifestBuilder::start("refine", cfg, out)?;
    let study = refinement_study(cfg, base, levels)?;
    let path = out.join("refine.csv");
    let rows = study.iter().flat_map(|s| {
        s.levels.iter().enumerate().map(|(i, l)| {
            let order = if i == 0 { None } else { s.orders[i - 1] };
            [
                s.quantity.to_owned(),
                l.n_cells.to_string(),
                l.n_steps.to_string(),
                format_f64(l.error),
                order.map(format_f64).unwrap_or_default(),
            ]
        })
    });
    write_csv(&path, &REFINE_HEADER, rows)?;
    manifest.artifacts.push(path);
    Ok((manifest.finish(out)?, study))
}
