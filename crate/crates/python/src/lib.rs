//! Python bindings: a `Problem` holding the discretised setup, plus the
//! forward solve, noisy observations, the regularised functional, its
//! gradient and the Landweber reconstruction.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use heatsrc_core::experiment::{run_selftest, ExperimentConfig, SelftestOptions};
use heatsrc_core::field::{Grids, ProductState, SpaceSource};
use heatsrc_core::forward::{ForwardSolver, ProblemSetup};
use heatsrc_core::landweber::{self, LandweberConfig, NoiseMode, ReconstructionTrace, StepMode};
use heatsrc_core::objective::{self, Objective, TikhonovConfig};

fn py_err(e: heatsrc_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Discretised direct problem on `[0, length] x [0, final_time]`.
#[pyclass(module = "heatsrc")]
struct Problem {
    setup: ProblemSetup,
}

impl Problem {
    fn source(&self, values: Vec<f64>) -> PyResult<SpaceSource> {
        SpaceSource::new(self.setup.space(), values).map_err(py_err)
    }

    fn state(&self, values: Vec<f64>) -> PyResult<ProductState> {
        if values.len() != self.setup.space().n_nodes() {
            return Err(PyValueError::new_err(format!(
                "expected {} nodal values, got {}",
                self.setup.space().n_nodes(),
                values.len()
            )));
        }
        Ok(ProductState::from_nodes(values))
    }
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (n_cells=256, n_steps=512, length=1.0, final_time=1.0, diffusion=1.0))]
    fn new(n_cells: usize, n_steps: usize, length: f64, final_time: f64, diffusion: f64) -> PyResult<Self> {
        let grids = Grids::new(length, n_cells, final_time, n_steps).map_err(py_err)?;
        let setup = ProblemSetup::new(grids).with_diffusion(diffusion).map_err(py_err)?;
        Ok(Self { setup })
    }

    /// Problem described by one of the built-in examples (1, 2 or 3).
    #[staticmethod]
    fn example(number: u8) -> PyResult<Self> {
        let cfg = ExperimentConfig::example(number).map_err(py_err)?;
        Ok(Self {
            setup: cfg.build_setup().map_err(py_err)?,
        })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.setup.space().n_cells()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.setup.time().n_steps()
    }

    fn nodes(&self) -> Vec<f64> {
        self.setup.space().nodes()
    }

    fn times(&self) -> Vec<f64> {
        self.setup.time().times()
    }

    /// Nodal values at every time level, one list per level.
    fn solve_forward(&self, f: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let f = self.source(f)?;
        let traj = ForwardSolver::new(&self.setup)
            .and_then(|s| s.solve(&f))
            .map_err(py_err)?;
        Ok(traj.states.into_iter().map(ProductState::into_values).collect())
    }

    fn final_state(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = self.source(f)?;
        let y = ForwardSolver::new(&self.setup)
            .and_then(|s| s.final_state(&f))
            .map_err(py_err)?;
        Ok(y.into_values())
    }

    /// Final-time data for `f_true` perturbed at relative level `noise`.
    #[pyo3(signature = (f_true, noise, seed=1, mode="zeromean"))]
    fn make_observation(&self, f_true: Vec<f64>, noise: f64, seed: u64, mode: &str) -> PyResult<Observation> {
        let mode: NoiseMode = mode.parse().map_err(py_err)?;
        let f = self.source(f_true)?;
        let obs = landweber::make_observation(&self.setup, &f, noise, seed, mode).map_err(py_err)?;
        Ok(Observation { inner: obs })
    }

    #[pyo3(signature = (f, data, epsilon=1e-6))]
    fn evaluate(&self, f: Vec<f64>, data: Vec<f64>, epsilon: f64) -> PyResult<f64> {
        let f = self.source(f)?;
        let data = self.state(data)?;
        let cfg = TikhonovConfig::new(epsilon).map_err(py_err)?;
        objective::evaluate(&self.setup, &f, &data, cfg).map_err(py_err)
    }

    #[pyo3(signature = (f, data, epsilon=1e-6))]
    fn gradient(&self, f: Vec<f64>, data: Vec<f64>, epsilon: f64) -> PyResult<Vec<f64>> {
        let f = self.source(f)?;
        let data = self.state(data)?;
        let cfg = TikhonovConfig::new(epsilon).map_err(py_err)?;
        let g = Objective::new(&self.setup, &data, cfg)
            .and_then(|o| o.gradient(&f))
            .map_err(py_err)?;
        Ok(g.values.into_values())
    }

    fn lipschitz_constant(&self) -> f64 {
        objective::lipschitz_constant(&self.setup)
    }

    /// Landweber reconstruction. `step` is `None` for the adaptive step or a
    /// fixed step length.
    #[pyo3(signature = (observation, epsilon=1e-6, stop_threshold=None, max_iter=1000, step=None, initial=None, truth=None))]
    #[allow(clippy::too_many_arguments)]
    fn reconstruct(
        &self,
        observation: &Observation,
        epsilon: f64,
        stop_threshold: Option<f64>,
        max_iter: usize,
        step: Option<f64>,
        initial: Option<Vec<f64>>,
        truth: Option<Vec<f64>>,
    ) -> PyResult<Trace> {
        let mut cfg = LandweberConfig::new(epsilon);
        cfg.stop_threshold = stop_threshold.unwrap_or(epsilon);
        cfg.max_iter = max_iter;
        if let Some(alpha) = step {
            cfg.step = StepMode::Fixed(alpha);
        }
        cfg.initial_iterate = initial.map(|v| self.source(v)).transpose()?;
        let truth = truth.map(|v| self.source(v)).transpose()?;
        let trace = landweber::run(&self.setup, &observation.inner, &cfg, truth.as_ref()).map_err(py_err)?;
        Ok(Trace { inner: trace })
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(n_cells={}, n_steps={}, length={}, final_time={}, diffusion={})",
            self.setup.space().n_cells(),
            self.setup.time().n_steps(),
            self.setup.space().ell(),
            self.setup.time().final_time(),
            self.setup.diffusion()
        )
    }
}

/// Noisy final-time data with the clean output it was made from.
#[pyclass(module = "heatsrc")]
struct Observation {
    inner: landweber::Observation,
}

#[pymethods]
impl Observation {
    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data.values().to_vec()
    }

    #[getter]
    fn clean(&self) -> Vec<f64> {
        self.inner.clean.values().to_vec()
    }

    #[getter]
    fn noise(&self) -> f64 {
        self.inner.noise_pct
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }
}

/// Iteration history. Per-iterate columns have one entry per `k`; step
/// columns use `None` on the final row.
#[pyclass(module = "heatsrc")]
struct Trace {
    inner: ReconstructionTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn stop_reason(&self) -> String {
        self.inner.stop.to_string()
    }

    #[getter]
    fn final_iterate(&self) -> Vec<f64> {
        self.inner.final_iterate.values().to_vec()
    }

    #[getter]
    fn objective(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.objective).collect()
    }

    #[getter]
    fn output_error(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.output_error).collect()
    }

    #[getter]
    fn source_error(&self) -> Vec<Option<f64>> {
        self.inner.rows.iter().map(|r| r.source_error).collect()
    }

    #[getter]
    fn alpha(&self) -> Vec<Option<f64>> {
        self.inner.rows.iter().map(|r| r.alpha).collect()
    }

    #[getter]
    fn grad_norm(&self) -> Vec<Option<f64>> {
        self.inner.rows.iter().map(|r| r.grad_norm).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(iterations={}, stop={})",
            self.inner.iterations(),
            self.inner.stop
        )
    }
}

/// TOML text of a built-in example configuration.
#[pyfunction]
fn example_config(number: u8) -> PyResult<String> {
    ExperimentConfig::example(number)
        .and_then(|c| c.to_toml())
        .map_err(py_err)
}

/// Runs the verification suites; returns `(name, passed, detail)` triples.
#[pyfunction]
#[pyo3(signature = (n_cells=64, n_steps=None, seed=1))]
fn selftest(n_cells: usize, n_steps: Option<usize>, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let opts = SelftestOptions {
        n_cells,
        n_steps: n_steps.unwrap_or(2 * n_cells),
        seed,
        fault: None,
    };
    let outcomes = run_selftest(&opts).map_err(py_err)?;
    Ok(outcomes
        .into_iter()
        .map(|o| (o.name.to_owned(), o.passed, o.detail))
        .collect())
}

#[pymodule]
pub fn heatsrc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Observation>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(example_config, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
