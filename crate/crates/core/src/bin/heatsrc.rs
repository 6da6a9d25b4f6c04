use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use heatsrc_core::experiment::commands::percent_label;
use heatsrc_core::experiment::selftest::Fault;
use heatsrc_core::experiment::{
    cmd_forward, cmd_reconstruct, cmd_refine, run_selftest, ExperimentConfig, SelftestOptions,
};
use heatsrc_core::field::Grids;
use heatsrc_core::landweber::NoiseMode;

#[derive(Parser)]
#[command(
    name = "heatsrc",
    version,
    about = "Heat-source reconstruction with dynamic boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the direct problem for the configured source.
    Forward(Common),
    /// Reconstruct the source at every configured noise level.
    Reconstruct(Common),
    /// Grid-refinement study of the solvers.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Cells on the coarsest level.
        #[arg(long, default_value_t = 32)]
        base_cells: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Run the built-in verification suites.
    Selftest {
        #[arg(long, default_value_t = 256)]
        n_cells: usize,
        /// Defaults to twice the number of cells.
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment definition.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Load a preset instead of a config file.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with = "config")]
    example: Option<u8>,
    #[arg(long, value_enum)]
    noise_mode: Option<NoiseModeArg>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseModeArg {
    Zeromean,
    Paper,
    Scalar,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::Zeromean => NoiseMode::ZeroMean,
            NoiseModeArg::Paper => NoiseMode::Paper,
            NoiseModeArg::Scalar => NoiseMode::Scalar,
        }
    }
}

impl Common {
    fn resolve(&self) -> heatsrc_core::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, self.example) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(n)) => ExperimentConfig::example(n)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(mode) = self.noise_mode {
            cfg.noise.mode = mode.into();
        }
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        let out = cfg.output.dir.clone();
        Ok((cfg, out))
    }
}

fn execute(cli: Cli) -> heatsrc_core::Result<bool> {
    match cli.command {
        Command::Forward(common) => {
            let (cfg, out) = common.resolve()?;
            let manifest = cmd_forward(&cfg, &out)?;
            println!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
            Ok(true)
        }
        Command::Reconstruct(common) => {
            let (cfg, out) = common.resolve()?;
            let (manifest, results) = cmd_reconstruct(&cfg, &out)?;
            println!("{:>6}  {:>5}  {:<10}  {:>12}  {:>12}", "p[%]", "k", "stop", "J", "E");
            for r in &results {
                let last = r.trace.last();
                println!(
                    "{:>6}  {:>5}  {:<10}  {:>12.4e}  {:>12.4e}",
                    percent_label(r.noise_pct),
                    r.trace.iterations(),
                    r.trace.stop.to_string(),
                    last.objective,
                    last.source_error.unwrap_or(f64::NAN)
                );
            }
            println!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
            Ok(true)
        }
        Command::Refine {
            common,
            base_cells,
            levels,
        } => {
            let (cfg, out) = common.resolve()?;
            let ratio = cfg.discretization.n_steps as f64 / cfg.discretization.n_cells as f64;
            let base_steps = ((base_cells as f64 * ratio).round() as usize).max(2);
            let base = Grids::new(cfg.problem.length, base_cells, cfg.problem.final_time, base_steps)?;
            let (manifest, study) = cmd_refine(&cfg, &out, base, levels)?;
            for s in &study {
                println!("{}", s.quantity);
                for (i, l) in s.levels.iter().enumerate() {
                    let order = if i == 0 { None } else { s.orders[i - 1] };
                    let order = order.map_or_else(|| "-".to_owned(), |o| format!("{o:.3}"));
                    println!(
                        "  {:>6} x {:<6} {:>12.4e}  order {order}",
                        l.n_cells, l.n_steps, l.error
                    );
                }
            }
            println!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
            Ok(true)
        }
        Command::Selftest {
            n_cells,
            n_steps,
            seed,
            inject_fault,
        } => {
            let opts = SelftestOptions {
                n_cells,
                n_steps: n_steps.unwrap_or(2 * n_cells),
                seed,
                fault: inject_fault.as_deref().map(str::parse::<Fault>).transpose()?,
            };
            let outcomes = run_selftest(&opts)?;
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} suites, {failed} failed", outcomes.len());
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
