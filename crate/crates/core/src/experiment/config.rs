//! TOML experiment definitions.
//!
//! ```toml
//! [problem]
//! length = 1.0
//! final_time = 1.0
//! diffusion = 1.0
//! potential = 0.0                 # number, named field, or "table:<path>"
//! boundary_potentials = [0.0, 0.0]
//! modulation = 1.0                # number or "affine:c0,ct,cx"
//! initial = 0.0
//!
//! [discretization]
//! n_cells = 256
//! n_steps = 512
//!
//! [source]
//! truth = "parabolic"             # parabolic | sine | gaussian | zero | number | table:<path>
//!
//! [noise]
//! levels = [0.01, 0.03, 0.05]
//! seed = 1
//! mode = "zeromean"               # zeromean | paper | scalar
//!
//! [solver]
//! epsilon = 1e-6
//! stop_threshold = 1e-6
//! initial_iterate = 0.0
//! step = "adaptive"               # adaptive | lipschitz | "fixed:<alpha>"
//! max_iter = 1000
//! ```
//!
//! Table paths are resolved relative to the working directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::read_space_table;
use crate::error::{Error, Result};
use crate::field::{Grids, ProductState, SpaceSource, SpatialGrid};
use crate::forward::ProblemSetup;
use crate::landweber::{LandweberConfig, NoiseMode, StepMode, DEFAULT_MAX_ITER};
use crate::objective::{lipschitz_constant, TikhonovConfig};

/// A number or a string, as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSpec {
    Number(f64),
    Text(String),
}

/// A function of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum FieldSpec {
    Constant(f64),
    /// `x(1 − x)`
    Parabolic,
    /// `sin(πx)`
    Sine,
    /// `exp(−8(x − ½)²)`
    Gaussian,
    Table(PathBuf),
}

impl FieldSpec {
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        Ok(match self {
            FieldSpec::Constant(c) => vec![*c; grid.n_nodes()],
            FieldSpec::Parabolic => grid.sample(|x| x * (1.0 - x)),
            FieldSpec::Sine => grid.sample(|x| (std::f64::consts::PI * x).sin()),
            FieldSpec::Gaussian => grid.sample(|x| (-8.0 * (x - 0.5) * (x - 0.5)).exp()),
            FieldSpec::Table(path) => read_space_table(path, grid)?,
        })
    }

    /// Closed form, when there is one.
    pub fn closed_form(&self) -> Option<fn(f64) -> f64> {
        match self {
            FieldSpec::Parabolic => Some(|x| x * (1.0 - x)),
            FieldSpec::Sine => Some(|x| (std::f64::consts::PI * x).sin()),
            FieldSpec::Gaussian => Some(|x| (-8.0 * (x - 0.5) * (x - 0.5)).exp()),
            _ => None,
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Constant(c) => write!(f, "{c}"),
            FieldSpec::Parabolic => f.write_str("parabolic"),
            FieldSpec::Sine => f.write_str("sine"),
            FieldSpec::Gaussian => f.write_str("gaussian"),
            FieldSpec::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "parabolic" => Ok(FieldSpec::Parabolic),
            "sine" => Ok(FieldSpec::Sine),
            "gaussian" => Ok(FieldSpec::Gaussian),
            "zero" => Ok(FieldSpec::Constant(0.0)),
            _ => {
                if let Some(path) = s.strip_prefix("table:") {
                    return Ok(FieldSpec::Table(PathBuf::from(path)));
                }
                s.parse::<f64>()
                    .map(FieldSpec::Constant)
                    .map_err(|_| Error::Config(format!("unknown field {s:?}")))
            }
        }
    }
}

impl TryFrom<RawSpec> for FieldSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        match raw {
            RawSpec::Number(c) => Ok(FieldSpec::Constant(c)),
            RawSpec::Text(s) => s.parse(),
        }
    }
}

impl From<FieldSpec> for RawSpec {
    fn from(spec: FieldSpec) -> Self {
        match spec {
            FieldSpec::Constant(c) => RawSpec::Number(c),
            other => RawSpec::Text(other.to_string()),
        }
    }
}

/// `r(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum ModulationSpec {
    Constant(f64),
    /// `c0 + ct·t + cx·x`
    Affine {
        c0: f64,
        ct: f64,
        cx: f64,
    },
}

impl ModulationSpec {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match *self {
            ModulationSpec::Constant(c) => c,
            ModulationSpec::Affine { c0, ct, cx } => c0 + ct * t + cx * x,
        }
    }
}

impl fmt::Display for ModulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulationSpec::Constant(c) => write!(f, "{c}"),
            ModulationSpec::Affine { c0, ct, cx } => write!(f, "affine:{c0},{ct},{cx}"),
        }
    }
}

impl FromStr for ModulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("affine:") {
            let parts: Vec<f64> = rest
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("modulation {s:?}: {e}")))?;
            return match parts[..] {
                [c0, ct, cx] => Ok(ModulationSpec::Affine { c0, ct, cx }),
                _ => Err(Error::Config(format!("modulation {s:?} needs three coefficients"))),
            };
        }
        s.parse::<f64>()
            .map(ModulationSpec::Constant)
            .map_err(|_| Error::Config(format!("unknown modulation {s:?}")))
    }
}

impl TryFrom<RawSpec> for ModulationSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        match raw {
            RawSpec::Number(c) => Ok(ModulationSpec::Constant(c)),
            RawSpec::Text(s) => s.parse(),
        }
    }
}

impl From<ModulationSpec> for RawSpec {
    fn from(spec: ModulationSpec) -> Self {
        match spec {
            ModulationSpec::Constant(c) => RawSpec::Number(c),
            other => RawSpec::Text(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StepSpec {
    Adaptive,
    Fixed(f64),
    /// `α = 1/L` with the Lipschitz constant of the setup.
    Lipschitz,
}

impl fmt::Display for StepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSpec::Adaptive => f.write_str("adaptive"),
            StepSpec::Fixed(a) => write!(f, "fixed:{a}"),
            StepSpec::Lipschitz => f.write_str("lipschitz"),
        }
    }
}

impl FromStr for StepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adaptive" => Ok(StepSpec::Adaptive),
            "lipschitz" => Ok(StepSpec::Lipschitz),
            other => other
                .strip_prefix("fixed:")
                .and_then(|a| a.trim().parse::<f64>().ok())
                .map(StepSpec::Fixed)
                .ok_or_else(|| Error::Config(format!("unknown step mode {other:?}"))),
        }
    }
}

impl TryFrom<String> for StepSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StepSpec> for String {
    fn from(spec: StepSpec) -> Self {
        spec.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub length: f64,
    pub final_time: f64,
    pub diffusion: f64,
    pub potential: FieldSpec,
    pub boundary_potentials: [f64; 2],
    pub modulation: ModulationSpec,
    pub initial: FieldSpec,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            length: 1.0,
            final_time: 1.0,
            diffusion: 1.0,
            potential: FieldSpec::Constant(0.0),
            boundary_potentials: [0.0, 0.0],
            modulation: ModulationSpec::Constant(1.0),
            initial: FieldSpec::Constant(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub n_cells: usize,
    pub n_steps: usize,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            n_cells: 256,
            n_steps: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub truth: FieldSpec,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            truth: FieldSpec::Parabolic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub levels: Vec<f64>,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            levels: vec![0.01, 0.03, 0.05],
            seed: 1,
            mode: NoiseMode::ZeroMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub stop_threshold: f64,
    pub initial_iterate: FieldSpec,
    pub step: StepSpec,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissible_radius: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            stop_threshold: 1e-6,
            initial_iterate: FieldSpec::Constant(0.0),
            step: StepSpec::Adaptive,
            max_iter: DEFAULT_MAX_ITER,
            admissible_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// A complete experiment definition. The default is the first example:
/// `f = x(1 − x)`, `ε = e_J = 10⁻⁶`, noise levels 1%, 3%, 5%.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub discretization: DiscretizationSection,
    pub source: SourceSection,
    pub noise: NoiseSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Presets for the three reconstruction examples.
    pub fn example(number: u8) -> Result<Self> {
        let mut cfg = Self::default();
        match number {
            1 => {}
            2 => {
                cfg.source.truth = FieldSpec::Sine;
                cfg.solver.epsilon = 1e-8;
                cfg.solver.stop_threshold = 1e-8;
            }
            3 => {
                cfg.source.truth = FieldSpec::Gaussian;
                cfg.solver.epsilon = 1e-8;
                cfg.solver.stop_threshold = 1e-8;
                cfg.noise.levels = vec![0.0, 0.01, 0.03, 0.05];
            }
            other => return Err(Error::Config(format!("no example {other} (expected 1, 2 or 3)"))),
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialisation, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        for (name, v) in [
            ("length", p.length),
            ("final_time", p.final_time),
            ("diffusion", p.diffusion),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("problem.{name} must be positive, got {v}")));
            }
        }
        if self.noise.levels.is_empty() {
            return Err(Error::Config("noise.levels must not be empty".into()));
        }
        if let Some(p) = self.noise.levels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("noise level {p} outside [0, 1]")));
        }
        self.grids()?;
        Ok(())
    }

    pub fn grids(&self) -> Result<Grids> {
        Grids::new(
            self.problem.length,
            self.discretization.n_cells,
            self.problem.final_time,
            self.discretization.n_steps,
        )
    }

    pub fn build_setup(&self) -> Result<ProblemSetup> {
        self.build_setup_on(self.grids()?)
    }

    /// The problem on another discretisation, for refinement studies.
    pub fn build_setup_on(&self, grids: Grids) -> Result<ProblemSetup> {
        let p = &self.problem;
        let potential = p.potential.sample(&grids.space)?;
        let initial = ProductState::from_nodes(p.initial.sample(&grids.space)?);
        let modulation = p.modulation;
        ProblemSetup::new(grids)
            .with_diffusion(p.diffusion)?
            .with_potential_values(potential)?
            .with_boundary_potentials(p.boundary_potentials[0], p.boundary_potentials[1])?
            .with_modulation(move |t, x| modulation.eval(t, x))?
            .with_initial(initial)
    }

    pub fn truth(&self, grid: &SpatialGrid) -> Result<SpaceSource> {
        SpaceSource::new(grid, self.source.truth.sample(grid)?)
    }

    pub fn landweber(&self, setup: &ProblemSetup) -> Result<LandweberConfig> {
        let s = &self.solver;
        let step = match s.step {
            StepSpec::Adaptive => StepMode::Adaptive,
            StepSpec::Fixed(a) => StepMode::Fixed(a),
            StepSpec::Lipschitz => StepMode::Fixed(1.0 / lipschitz_constant(setup)),
        };
        let initial = SpaceSource::new(setup.space(), s.initial_iterate.sample(setup.space())?)?;
        let cfg = LandweberConfig {
            initial_iterate: if initial.is_zero() { None } else { Some(initial) },
            stop_threshold: s.stop_threshold,
            max_iter: s.max_iter,
            step,
            tikhonov: TikhonovConfig {
                epsilon: s.epsilon,
                admissible_radius: s.admissible_radius,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for n in 1..=3 {
            let cfg = ExperimentConfig::example(n).unwrap();
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg, "{text}");
            assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        }
        assert!(ExperimentConfig::example(4).is_err());
    }

    #[test]
    fn specs_parse_from_numbers_and_strings() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [problem]
            potential = "zero"
            modulation = "affine:1, 0.5, -0.25"
            initial = 2
            [source]
            truth = "table:data/f.csv"
            [solver]
            step = "fixed:0.4"
            admissible_radius = 10.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.problem.potential, FieldSpec::Constant(0.0));
        assert_eq!(
            cfg.problem.modulation,
            ModulationSpec::Affine {
                c0: 1.0,
                ct: 0.5,
                cx: -0.25
            }
        );
        assert_eq!(cfg.problem.initial, FieldSpec::Constant(2.0));
        assert_eq!(cfg.source.truth, FieldSpec::Table(PathBuf::from("data/f.csv")));
        assert_eq!(cfg.solver.step, StepSpec::Fixed(0.4));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("[noise]\nlevels = []").is_err());
        assert!(ExperimentConfig::from_toml("[noise]\nlevels = [1.5]").is_err());
        assert!(ExperimentConfig::from_toml("[discretization]\nn_cells = 2").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\nlength = -1").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\ncolour = 3").is_err());
        assert!(ExperimentConfig::from_toml("[source]\ntruth = \"cubic\"").is_err());
        assert!(ExperimentConfig::from_toml("[noise]\nmode = \"gauss\"").is_err());
    }

    #[test]
    fn lipschitz_step_uses_setup_constant() {
        let mut cfg = ExperimentConfig {
            discretization: DiscretizationSection { n_cells: 8, n_steps: 4 },
            ..Default::default()
        };
        cfg.solver.step = StepSpec::Lipschitz;
        let setup = cfg.build_setup().unwrap();
        let lw = cfg.landweber(&setup).unwrap();
        assert_eq!(lw.step, StepMode::Fixed(1.0 / lipschitz_constant(&setup)));
        assert!(lw.initial_iterate.is_none());
    }

    #[test]
    fn setup_carries_configured_coefficients() {
        let mut cfg = ExperimentConfig {
            discretization: DiscretizationSection { n_cells: 8, n_steps: 4 },
            ..Default::default()
        };
        cfg.problem.potential = FieldSpec::Parabolic;
        cfg.problem.boundary_potentials = [0.5, 1.5];
        cfg.problem.modulation = ModulationSpec::Affine {
            c0: 1.0,
            ct: 2.0,
            cx: 0.0,
        };
        let setup = cfg.build_setup().unwrap();
        assert_eq!(setup.potential()[4], 0.25);
        assert_eq!(setup.boundary_potentials(), (0.5, 1.5));
        assert_eq!(setup.modulation_at(4)[0], 3.0);
    }
}
