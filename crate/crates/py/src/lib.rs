//! Python bindings: grids, fields, closed-form surfaces, time integration,
//! transport diagnostics and the CLI commands.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sediment_lab::analysis::{self, BallFamily};
use sediment_lab::analytic::{self, Family, HillParams, HillRelations, SeparableParams, Shape};
use sediment_lab::cli;
use sediment_lab::evolve::{self, EvolveOptions};
use sediment_lab::transport::{self, MeasureOptions};
use sediment_lab::{FieldRole, GridSpec, LabError, ScalarField};

fn to_py(e: LabError) -> PyErr {
    match e {
        LabError::Io(_)
        | LabError::Stability { .. }
        | LabError::NonFinite { .. }
        | LabError::Convergence { .. }
        | LabError::Certificate { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (width=1.0, length=1.0, nx=32, ny=32))]
    fn new(width: f64, length: f64, nx: usize, ny: usize) -> PyResult<Self> {
        GridSpec::new(width, length, nx, ny).map(Self).map_err(to_py)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx()
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn dy(&self) -> f64 {
        self.0.dy()
    }

    /// Cell centers in storage order (`i` fastest).
    fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.0.cells()).map(|k| self.0.center(k)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(width={}, length={}, nx={}, ny={})", self.0.width(), self.0.length(), self.0.nx(), self.0.ny())
    }
}

/// A cell-centered scalar field; `values` are in storage order.
#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(ScalarField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        ScalarField::new(grid.0, FieldRole::Generic, values).map(Self).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let g = self.0.grid();
        if i >= g.nx() || j >= g.ny() {
            return Err(PyValueError::new_err(format!("cell ({i}, {j}) is outside the grid")));
        }
        Ok(self.0.get(i, j))
    }

    fn min(&self) -> f64 {
        self.0.min()
    }

    fn max(&self) -> f64 {
        self.0.max()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    /// Plain graymap text of the field.
    fn heatmap_pgm(&self) -> String {
        cli::io::heatmap_pgm(&self.0).0
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

#[allow(clippy::too_many_arguments)]
fn separable(
    mountain: bool,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    h1: f64,
    big_h1: f64,
    x0: f64,
    y0: f64,
    crest: bool,
) -> SeparableParams {
    let shape = if mountain { Shape::Mountain } else { Shape::Ridge { crest } };
    SeparableParams { a, b, c, d, h1, big_h1, x0, y0, shape }
}

/// Water depth and surface `(h, H)` of a separable ridge.
#[pyfunction]
#[pyo3(signature = (grid, a=-1.0, b=0.0, c=1.5, d=0.3, h1=1.0, big_h1=1.0, x0=0.0, y0=0.0, crest=false))]
#[allow(clippy::too_many_arguments)]
fn ridge_fields(
    grid: &PyGrid,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    h1: f64,
    big_h1: f64,
    x0: f64,
    y0: f64,
    crest: bool,
) -> PyResult<(PyField, PyField)> {
    let p = separable(false, a, b, c, d, h1, big_h1, x0, y0, crest);
    let (h, s) = analytic::ridge_fields(&p, &grid.0).map_err(to_py)?;
    Ok((PyField(h), PyField(s)))
}

/// Water depth and surface `(h, H)` of a separable mountain.
#[pyfunction]
#[pyo3(signature = (grid, a=1.0, b=0.0, c=1.5, d=0.3, h1=1.0, big_h1=1.0, x0=0.0, y0=0.0))]
#[allow(clippy::too_many_arguments)]
fn mountain_fields(
    grid: &PyGrid,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    h1: f64,
    big_h1: f64,
    x0: f64,
    y0: f64,
) -> PyResult<(PyField, PyField)> {
    let p = separable(true, a, b, c, d, h1, big_h1, x0, y0, false);
    let (h, s) = analytic::mountain_fields(&p, &grid.0).map_err(to_py)?;
    Ok((PyField(h), PyField(s)))
}

fn relations(name: &str) -> PyResult<HillRelations> {
    match name {
        "published" => Ok(HillRelations::Published),
        "exact" => Ok(HillRelations::Exact),
        other => Err(PyValueError::new_err(format!("relations must be 'published' or 'exact', got {other:?}"))),
    }
}

fn hill_params(h1: f64, big_h1: f64, c: f64, beta: f64, x0: f64, y0: f64, rel: &str) -> PyResult<HillParams> {
    Ok(HillParams::derived(h1, big_h1, c, beta, x0, y0, relations(rel)?))
}

/// Water depth and surface `(h, H)` of a collapsing hill at time `t`.
#[pyfunction]
#[pyo3(signature = (grid, t=0.0, h1=1.0, big_h1=1.0, c=0.3, beta=-0.25, x0=0.5, y0=0.5, relations="published"))]
#[allow(clippy::too_many_arguments)]
fn hill_fields(
    grid: &PyGrid,
    t: f64,
    h1: f64,
    big_h1: f64,
    c: f64,
    beta: f64,
    x0: f64,
    y0: f64,
    relations: &str,
) -> PyResult<(PyField, PyField)> {
    let p = hill_params(h1, big_h1, c, beta, x0, y0, relations)?;
    let (h, s) = analytic::hill_fields(&p, &grid.0, t).map_err(to_py)?;
    Ok((PyField(h), PyField(s)))
}

/// Maximum PDE residual of a closed-form family on `n x n` grids, and the
/// observed order. `family` is `"ridge"`, `"mountain"` or `"hill"`; the
/// keyword arguments are the family parameters.
#[pyfunction]
#[pyo3(signature = (family, levels, **params))]
fn residual_refinement(
    family: &str,
    levels: Vec<usize>,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<(Vec<f64>, Option<f64>)> {
    let get = |k: &str, default: f64| -> PyResult<f64> {
        match params {
            Some(p) => match p.get_item(k)? {
                Some(v) => v.extract(),
                None => Ok(default),
            },
            None => Ok(default),
        }
    };
    let fam = match family {
        "ridge" | "mountain" => {
            let mountain = family == "mountain";
            let crest = match params {
                Some(p) => p.get_item("crest")?.map(|v| v.extract()).transpose()?.unwrap_or(false),
                None => false,
            };
            Family::Separable(separable(
                mountain,
                get("a", if mountain { 1.0 } else { -1.0 })?,
                get("b", 0.0)?,
                get("c", 1.5)?,
                get("d", 0.3)?,
                get("h1", 1.0)?,
                get("big_h1", 1.0)?,
                get("x0", 0.0)?,
                get("y0", 0.0)?,
                crest,
            ))
        }
        "hill" => {
            let rel: String = match params {
                Some(p) => p.get_item("relations")?.map(|v| v.extract()).transpose()?.unwrap_or("published".into()),
                None => "published".into(),
            };
            Family::Hill(hill_params(
                get("h1", 1.0)?,
                get("big_h1", 1.0)?,
                get("c", 0.3)?,
                get("beta", -0.25)?,
                get("x0", 0.5)?,
                get("y0", 0.5)?,
                &rel,
            )?)
        }
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    };
    let s = analytic::residual_refinement(&fam, 1.0, 1.0, &levels, 0.0).map_err(to_py)?;
    Ok((s.max_residuals, s.order))
}

/// A finished run: snapshots, per-step diagnostics and monitors.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(evolve::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.diagnostics.len()
    }

    fn snapshot(&self, k: usize) -> PyResult<PyField> {
        self.0
            .snapshots
            .get(k)
            .map(|s| PyField(s.surface.clone()))
            .ok_or_else(|| PyValueError::new_err(format!("snapshot {k} out of range")))
    }

    fn __len__(&self) -> usize {
        self.0.snapshots.len()
    }

    /// Per-step energy.
    fn energies(&self) -> Vec<f64> {
        self.0.diagnostics.iter().map(|d| d.energy).collect()
    }

    /// Per-step L2 norm.
    fn l2_norms(&self) -> Vec<f64> {
        self.0.diagnostics.iter().map(|d| d.l2).collect()
    }

    /// First step at which energy or L2 norm increased, if any.
    fn dissipation_violation(&self) -> Option<usize> {
        self.0.dissipation_violation()
    }

    fn max_relative_mass_balance(&self) -> f64 {
        self.0.max_relative_mass_balance()
    }

    /// Fitted rate `r` of `||H(t)|| / ||H(0)|| = (1 + 2 r t)^{-1/2}`.
    fn fit_decay(&self) -> PyResult<f64> {
        evolve::fit_decay(&self.0).map(|f| f.r_fit).map_err(to_py)
    }

    /// Exact transport at snapshot `k` (negative counts from the end).
    /// Returns a dict with the cost, dual objective, gap and alignment.
    #[pyo3(signature = (k=-1))]
    fn transport<'py>(&self, py: Python<'py>, k: i64) -> PyResult<Bound<'py, PyDict>> {
        let n = self.0.snapshots.len() as i64;
        let idx = if k < 0 { n + k } else { k };
        if idx < 0 || idx >= n {
            return Err(PyValueError::new_err(format!("snapshot {k} out of range (have {n})")));
        }
        let idx = idx as usize;
        let m = transport::build_measures(&self.0, idx, &MeasureOptions::default()).map_err(to_py)?;
        let sol = transport::solve_exact(&m.mu, &m.nu, transport::EXACT_SIZE_CAP).map_err(to_py)?;
        let dirs = transport::displacement_directions(&sol.plan, &m.mu, 0.0).map_err(to_py)?;
        let rep = transport::alignment_report(&dirs, &sol.dual, &self.0.snapshots[idx].surface, 1e-10)
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("cost", sol.plan.cost)?;
        d.set_item("dual_objective", sol.dual.objective)?;
        d.set_item("gap", sol.gap)?;
        d.set_item("erosion_ok", m.erosion_ok)?;
        d.set_item("rescale", m.rescale)?;
        d.set_item("mean_cosine_dual", rep.mean_cosine_dual)?;
        d.set_item("mean_cosine_plan", rep.mean_cosine_plan)?;
        d.set_item("excluded_fraction", rep.excluded_fraction)?;
        d.set_item("potential", PyField(sol.dual.potential))?;
        Ok(d)
    }
}

/// Explicit integration of the surface to `t_end`.
#[pyfunction]
#[pyo3(signature = (surface, water, t_end=0.01, cfl_safety=0.4, snapshot_stride=1, max_steps=1_000_000))]
fn evolve_run(
    py: Python<'_>,
    surface: &PyField,
    water: &PyField,
    t_end: f64,
    cfl_safety: f64,
    snapshot_stride: usize,
    max_steps: usize,
) -> PyResult<PyTrajectory> {
    let opts = EvolveOptions { t_end, cfl_safety, snapshot_stride, max_steps, ..Default::default() };
    let s = surface.0.clone().with_role(FieldRole::Surface).map_err(to_py)?;
    let h = water.0.clone().with_role(FieldRole::WaterDepth).map_err(to_py)?;
    py.detach(|| evolve::run(&s, &h, &opts)).map(PyTrajectory).map_err(to_py)
}

/// Estimate of the `A_4` constant of `h^{10/3}` over dyadic balls on `grid`.
/// `h(x, y)` is a Python callable. Returns `(sup_estimate, any_divergent)`.
#[pyfunction]
#[pyo3(signature = (h, grid, stride=4, quad_n=32))]
fn muckenhoupt_a4(h: &Bound<'_, PyAny>, grid: &PyGrid, stride: usize, quad_n: usize) -> PyResult<(f64, bool)> {
    let balls = BallFamily::dyadic(&grid.0, stride).map_err(to_py)?;
    let mut failure: Option<PyErr> = None;
    let cell = std::cell::RefCell::new(&mut failure);
    let f = |x: f64, y: f64| -> f64 {
        match h.call1((x, y)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                cell.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let est = analysis::muckenhoupt_a4(&f, &balls, quad_n).map_err(to_py)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((est.sup_estimate, est.any_divergent))
}

fn load_config(text: &str, overrides: Vec<String>, out: &str) -> PyResult<cli::RunConfig> {
    let mut cfg = cli::parse_with_overrides(text, &overrides, None).map_err(to_py)?;
    cfg.output.directory = out.to_string();
    Ok(cfg)
}

/// Runs a CLI command (`simulate`, `verify`, `transport` or `heatmap`) with
/// the given configuration text and overrides, writing into `out`. Returns
/// the process exit code the binary would use.
#[pyfunction]
#[pyo3(signature = (command, out, config="", overrides=Vec::new()))]
fn run_command(py: Python<'_>, command: &str, out: &str, config: &str, overrides: Vec<String>) -> PyResult<i32> {
    let cfg = load_config(config, overrides, out)?;
    let result = py.detach(|| match command {
        "simulate" => Ok(cli::cmd_simulate(&cfg)),
        "verify" => Ok(cli::cmd_verify(&cfg)),
        "transport" => Ok(cli::cmd_transport(&cfg)),
        "heatmap" => Ok(cli::cmd_heatmap(&cfg, None)),
        other => Err(other.to_string()),
    });
    match result {
        Ok(Ok(outcome)) => Ok(outcome.exit_code()),
        Ok(Err(e)) => Ok(cli::exit_code(&e)),
        Err(other) => Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    }
}

/// Reads a field CSV written by `simulate` onto `grid`.
#[pyfunction]
fn read_field_csv(path: &str, grid: &PyGrid) -> PyResult<PyField> {
    cli::read_field_csv(Path::new(path), &grid.0, FieldRole::Generic).map(PyField).map_err(to_py)
}

#[pymodule]
fn sediment_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(ridge_fields, m)?)?;
    m.add_function(wrap_pyfunction!(mountain_fields, m)?)?;
    m.add_function(wrap_pyfunction!(hill_fields, m)?)?;
    m.add_function(wrap_pyfunction!(residual_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_run, m)?)?;
    m.add_function(wrap_pyfunction!(muckenhoupt_a4, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(read_field_csv, m)?)?;
    Ok(())
}
