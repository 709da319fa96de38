//! Python bindings: grids, fields, interfaces, the two-phase scheme, the
//! circle oracles and the experiment drivers.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use hbmo::circle::{self, CircleParams, HalfTimeEntry};
use hbmo::distance::{self, RadiusWeighting};
use hbmo::experiments::{self, DistanceMode, ExperimentSpec};
use hbmo::flow::{self, SolverSettings, StepOutcome};
use hbmo::grid::{self, make_grid};
use hbmo::wave::{self, WaveParams};

create_exception!(hbmo_py, HbmoError, PyException);

fn err(e: hbmo::HbmoError) -> PyErr {
    match e {
        hbmo::HbmoError::Config(list) => PyValueError::new_err(list.join("; ")),
        hbmo::HbmoError::InvalidGrid(_) | hbmo::HbmoError::InvalidParams(_) | hbmo::HbmoError::GridMismatch => {
            PyValueError::new_err(e.to_string())
        }
        other => HbmoError::new_err(other.to_string()),
    }
}

fn weighting(name: &str) -> PyResult<RadiusWeighting> {
    match name {
        "endpoints" => Ok(RadiusWeighting::Endpoints),
        "uniform" => Ok(RadiusWeighting::Uniform),
        "length_weighted" => Ok(RadiusWeighting::LengthWeighted),
        other => Err(PyValueError::new_err(format!(
            "unknown weighting {other:?} (endpoints, uniform, length_weighted)"
        ))),
    }
}

fn circle_params(r0: f64, v0: f64) -> PyResult<CircleParams> {
    if !(r0 > 0.0) {
        return Err(PyValueError::new_err(format!("r0 must be positive, got {r0}")));
    }
    Ok(CircleParams::new(r0, v0))
}

/// Square node lattice on `[0, domain]²`.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(hbmo::Grid2D);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, domain = 1.0))]
    fn new(n: usize, domain: f64) -> PyResult<Self> {
        make_grid(n, domain).map(PyGrid).map_err(err)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    fn __repr__(&self) -> String {
        format!("Grid(nx={}, ny={}, h={})", self.0.nx, self.0.ny, self.0.h())
    }
}

/// Node values, `i` running fastest.
#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(hbmo::ScalarField);

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        hbmo::ScalarField::from_values(grid.0, values).map(PyField).map_err(err)
    }

    /// Exact signed distance to a circle, positive inside.
    #[staticmethod]
    fn circle_distance(grid: &PyGrid, center: (f64, f64), radius: f64) -> Self {
        PyField(distance::circle_distance([center.0, center.1], radius, grid.0))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn at(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.0.grid.nx || j >= self.0.grid.ny {
            return Err(PyValueError::new_err(format!("node ({i}, {j}) outside the grid")));
        }
        Ok(self.0.at(i, j))
    }

    fn laplacian(&self) -> Self {
        PyField(grid::laplacian_neumann(&self.0))
    }

    fn integrate(&self) -> f64 {
        self.0.integrate()
    }

    fn dirichlet_energy(&self) -> f64 {
        grid::dirichlet_energy(&self.0)
    }

    /// Leapfrog solve of `u_tt = c² Δu` from `u(0) = self`, `u_t(0) = -v0`.
    #[pyo3(signature = (duration, c2 = 2.0, substeps = 64, v0 = None))]
    fn wave_solve(&self, py: Python<'_>, duration: f64, c2: f64, substeps: usize, v0: Option<&PyField>) -> PyResult<Self> {
        let u0 = self.0.clone();
        let v0 = v0.map_or_else(|| hbmo::ScalarField::zeros(u0.grid), |v| v.0.clone());
        py.detach(move || {
            let params = WaveParams::for_duration(&u0.grid, c2, duration, substeps)?;
            wave::solve(&u0, &v0, &params)
        })
        .map(PyField)
        .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.values.len()
    }
}

/// Oriented chords of a zero level set, positive side on the left.
#[pyclass(name = "Interface", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyInterface(hbmo::Interface);

#[pymethods]
impl PyInterface {
    #[new]
    fn new(segments: Vec<((f64, f64), (f64, f64))>) -> Self {
        PyInterface(hbmo::Interface::new(
            segments
                .into_iter()
                .map(|(p, q)| hbmo::Segment {
                    p: [p.0, p.1],
                    q: [q.0, q.1],
                })
                .collect(),
        ))
    }

    /// Zero level set of the piecewise-linear interpolant.
    #[staticmethod]
    fn extract(field: &PyField) -> Self {
        PyInterface(distance::extract_interface(&field.0))
    }

    #[getter]
    fn segments(&self) -> Vec<((f64, f64), (f64, f64))> {
        self.0
            .segments
            .iter()
            .map(|s| ((s.p[0], s.p[1]), (s.q[0], s.q[1])))
            .collect()
    }

    fn length(&self) -> f64 {
        self.0.length()
    }

    fn enclosed_area(&self) -> f64 {
        self.0.enclosed_area()
    }

    fn hausdorff(&self, other: &PyInterface) -> f64 {
        self.0.hausdorff(&other.0)
    }

    /// Exact distance to the chords, signed by `sign_source >= 0`.
    fn signed_distance(&self, sign_source: &PyField) -> PyResult<PyField> {
        distance::signed_distance_field(&self.0, &sign_source.0)
            .map(PyField)
            .map_err(err)
    }

    #[pyo3(signature = (center, weighting = "endpoints"))]
    fn average_radius(&self, center: (f64, f64), weighting: &str) -> PyResult<f64> {
        Ok(distance::average_radius(&self.0, [center.0, center.1], self::weighting(weighting)?).radius)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Two-phase scheme state: the current and previous signed distances.
#[pyclass(name = "State", frozen)]
struct PyState {
    inner: hbmo::HbmoState,
    settings: SolverSettings,
}

fn outcome(o: StepOutcome, settings: SolverSettings) -> Option<PyState> {
    o.state().map(|inner| PyState { inner, settings })
}

#[pymethods]
impl PyState {
    /// First step from `gamma0` with a constant or per-chord outward
    /// velocity. Returns `None` when the interface vanishes.
    #[staticmethod]
    #[pyo3(signature = (gamma0, sign_source, tau, velocity = 0.0, per_segment = None, substeps = 64))]
    fn first_step(
        py: Python<'_>,
        gamma0: &PyInterface,
        sign_source: &PyField,
        tau: f64,
        velocity: f64,
        per_segment: Option<Vec<f64>>,
        substeps: usize,
    ) -> PyResult<Option<Self>> {
        let settings = SolverSettings {
            substeps,
            ..Default::default()
        };
        let v = per_segment.unwrap_or_else(|| vec![velocity; gamma0.0.len()]);
        let (g, s) = (gamma0.0.clone(), sign_source.0.clone());
        let o = py
            .detach(move || flow::first_step(&g, &s, &v, tau, &settings))
            .map_err(err)?;
        Ok(outcome(o, settings))
    }

    /// Interface at rest: both histories equal.
    #[staticmethod]
    #[pyo3(signature = (gamma0, sign_source, tau, substeps = 64))]
    fn at_rest(gamma0: &PyInterface, sign_source: &PyField, tau: f64, substeps: usize) -> PyResult<Self> {
        let inner = flow::state_at_rest(&gamma0.0, &sign_source.0, tau).map_err(err)?;
        Ok(PyState {
            inner,
            settings: SolverSettings {
                substeps,
                ..Default::default()
            },
        })
    }

    /// Next state, or `None` on extinction.
    fn step(&self, py: Python<'_>) -> PyResult<Option<PyState>> {
        let (state, settings) = (self.inner.clone(), self.settings);
        let o = py.detach(move || flow::step(&state, &settings)).map_err(err)?;
        Ok(outcome(o, self.settings))
    }

    #[getter]
    fn interface(&self) -> PyInterface {
        PyInterface(self.inner.interface.clone())
    }

    #[getter]
    fn distance(&self) -> PyField {
        PyField(self.inner.d_curr.clone())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.inner.step_index
    }
}

#[pyfunction]
#[pyo3(signature = (r0, v0 = 0.0))]
fn extinction_time(r0: f64, v0: f64) -> PyResult<f64> {
    Ok(circle::extinction_time(&circle_params(r0, v0)?))
}

#[pyfunction]
#[pyo3(signature = (t, r0, v0 = 0.0))]
fn exact_radius(t: f64, r0: f64, v0: f64) -> PyResult<f64> {
    Ok(circle::exact_radius(t, &circle_params(r0, v0)?).radius)
}

/// Radii of the idealized scheme with `τ = t_e / n`.
#[pyfunction]
#[pyo3(signature = (r0, n, v0 = 0.0))]
fn idealized_recursion(r0: f64, n: usize, v0: f64) -> PyResult<Vec<f64>> {
    circle_params(r0, v0)?;
    if n < 2 {
        return Err(PyValueError::new_err("need at least two divisions"));
    }
    Ok(circle::idealized_recursion(r0, v0, n))
}

/// Rows `(N, error, order)` of the idealized circle convergence table.
#[pyfunction]
#[pyo3(signature = (r0 = 1.0, v0 = 0.0, base_n = 10, levels = 8, refinement = 4))]
fn circle_table(r0: f64, v0: f64, base_n: usize, levels: usize, refinement: usize) -> PyResult<Vec<(usize, f64, Option<f64>)>> {
    hbmo::cli::cmd_circle_table(r0, v0, base_n, levels, refinement, HalfTimeEntry::OneBased).map_err(err)?;
    Ok(circle::convergence_table(r0, v0, base_n, levels, refinement, HalfTimeEntry::OneBased)
        .into_iter()
        .map(|r| (r.n, r.error, r.order))
        .collect())
}

/// `(x_approx, x_exact)` for a point mass with acceleration `-kappa(t)`.
#[pyfunction]
fn pointmass_check(kappa: Bound<'_, PyAny>, v0: f64, t_end: f64, n: usize) -> PyResult<(f64, f64)> {
    let failure = std::cell::RefCell::new(None);
    let result = circle::pointmass_check(
        |t| match kappa.call1((t,)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        v0,
        t_end,
        n,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

fn spec(n: usize, mode: &str, divisions: usize, substeps: usize) -> PyResult<ExperimentSpec> {
    let mode: DistanceMode = mode.parse().map_err(PyValueError::new_err)?;
    let mut s = ExperimentSpec::new(n, mode);
    s.divisions = divisions;
    s.substeps = substeps;
    Ok(s)
}

/// Shrinking-circle experiment on an `n`-node grid. Returns
/// `(l2_error, [(t, mean radius)], extinction time or None)`.
#[pyfunction]
#[pyo3(signature = (n, mode = "ideal", divisions = 512, substeps = 64))]
fn run_experiment(
    py: Python<'_>,
    n: usize,
    mode: &str,
    divisions: usize,
    substeps: usize,
) -> PyResult<(f64, Vec<(f64, f64)>, Option<f64>)> {
    let s = spec(n, mode, divisions, substeps)?;
    let r = py.detach(move || experiments::run_mode(&s)).map_err(err)?;
    Ok((r.l2_error, r.radii, r.extinct_at))
}

/// Rows `(N, l2_error, order)` over ascending grids.
#[pyfunction]
#[pyo3(signature = (grids, mode = "ideal", divisions = 512, substeps = 64))]
fn convergence_study(
    py: Python<'_>,
    grids: Vec<usize>,
    mode: &str,
    divisions: usize,
    substeps: usize,
) -> PyResult<Vec<(usize, f64, Option<f64>)>> {
    let base = spec(grids.first().copied().unwrap_or(16), mode, divisions, substeps)?;
    let rows = py
        .detach(move || experiments::convergence_study(&base, &grids))
        .map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.grid_n, r.l2_error, r.order)).collect())
}

/// Runs a TOML run config. Returns `(steps, frames_written, extinct_at,
/// max_volume_residual)`.
#[pyfunction]
fn evolve(py: Python<'_>, config: PathBuf) -> PyResult<(usize, usize, Option<f64>, Option<f64>)> {
    let s = py.detach(move || hbmo::cli::cmd_evolve(&config)).map_err(err)?;
    Ok((s.steps, s.frames_written, s.extinct_at, s.max_volume_residual))
}

#[pymodule]
fn hbmo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HbmoError", m.py().get_type::<HbmoError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyInterface>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(extinction_time, m)?)?;
    m.add_function(wrap_pyfunction!(exact_radius, m)?)?;
    m.add_function(wrap_pyfunction!(idealized_recursion, m)?)?;
    m.add_function(wrap_pyfunction!(circle_table, m)?)?;
    m.add_function(wrap_pyfunction!(pointmass_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}
