//! Python bindings. Bodies are passed as lists of `(x, y)` pairs;
//! configurations, measurement sets and reports travel as JSON strings in
//! the same formats the command-line tool reads and writes.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use covrecon::covariogram::covariogram_at;
use covrecon::geometry;
use covrecon::io;
use covrecon::measurement::{self, NoiseModel};
use covrecon::pipelines::{self, Input, PipelineConfig};
use covrecon::shapes::ShapeSpec;
use covrecon::spectral;
use covrecon::{Direction, Error, Vec2};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        Error::ReconstructionFailure { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A convex polygon.
#[pyclass(name = "Polygon", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPolygon(covrecon::Polygon);

#[pymethods]
impl PyPolygon {
    #[new]
    fn new(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        let v = vertices.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
        covrecon::Polygon::new(v).map(PyPolygon).map_err(to_py)
    }

    /// Builds a test body from a shape description such as
    /// `{"kind": "regular-polygon", "m": 5, "scale": 0.48}` given as JSON.
    #[staticmethod]
    fn from_shape(spec: &str) -> PyResult<Self> {
        let s: ShapeSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        s.build().map(PyPolygon).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        io::body_from_json(s).map(PyPolygon).map_err(to_py)
    }

    fn to_json(&self) -> String {
        io::body_to_json(&self.0)
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.0.vertices().iter().map(|v| (v.x, v.y)).collect()
    }

    fn area(&self) -> f64 {
        self.0.area()
    }

    fn perimeter(&self) -> f64 {
        self.0.perimeter()
    }

    fn brightness(&self, angle: f64) -> PyResult<f64> {
        self.0.brightness(Direction::from_angle(angle)).map_err(to_py)
    }

    fn support(&self, angle: f64) -> PyResult<f64> {
        self.0.support(Direction::from_angle(angle)).map_err(to_py)
    }

    fn covariogram(&self, x: f64, y: f64) -> f64 {
        covariogram_at(&self.0, Vec2::new(x, y))
    }

    fn squared_modulus(&self, x: f64, y: f64) -> f64 {
        spectral::squared_modulus(&self.0, Vec2::new(x, y))
    }

    fn difference_body(&self) -> Self {
        PyPolygon(geometry::difference_body(&self.0))
    }

    fn blaschke_body(&self) -> PyResult<Self> {
        geometry::blaschke_body(&self.0).map(PyPolygon).map_err(to_py)
    }

    fn reflect(&self) -> Self {
        PyPolygon(self.0.reflect())
    }

    fn centered(&self) -> PyResult<Self> {
        self.0.centered().map(PyPolygon).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Polygon({} vertices, area={:.6})", self.0.len(), self.0.area())
    }
}

#[pyfunction]
fn hausdorff_distance(p: &PyPolygon, q: &PyPolygon) -> PyResult<f64> {
    geometry::hausdorff_distance(&p.0, &q.0).map_err(to_py)
}

#[pyfunction]
fn synthesis_residual(p: &PyPolygon, k: usize, gamma: f64) -> PyResult<f64> {
    spectral::synthesis_residual(&p.0, k, gamma).map_err(to_py)
}

fn noise_from(kind: &str, sigma: f64, scale: f64) -> PyResult<NoiseModel> {
    Ok(match kind {
        "none" => NoiseModel::None,
        "gaussian" => NoiseModel::Gaussian { sigma },
        "poisson" => NoiseModel::Poisson { scale },
        "poisson-gaussian" => NoiseModel::PoissonGaussian { scale, sigma },
        other => return Err(PyValueError::new_err(format!("unknown noise model {other}"))),
    })
}

/// Simulated measurements as a `meas/1` JSON string. `design` is one of
/// `cov-grid`, `cov-blaschke`, `mod2`, `mod`.
#[pyfunction]
#[pyo3(signature = (body, design, k, gamma=0.75, noise="none", sigma=0.01, poisson_scale=1000.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn measure(
    body: &PyPolygon,
    design: &str,
    k: usize,
    gamma: f64,
    noise: &str,
    sigma: f64,
    poisson_scale: f64,
    seed: u64,
) -> PyResult<String> {
    let noise = noise_from(noise, sigma, poisson_scale)?;
    let p = &body.0;
    let ms = match design {
        "cov-grid" => measurement::gen_cov_grid(p, k, noise, seed),
        "cov-blaschke" => measurement::gen_cov_blaschke(p, k, &Direction::equally_spaced(k), noise, seed),
        "mod2" => measurement::gen_mod2(p, k, gamma, noise, seed),
        "mod" => measurement::gen_mod_pair(p, k, gamma, noise, seed),
        other => return Err(PyValueError::new_err(format!("unknown design {other}"))),
    }
    .map_err(to_py)?;
    Ok(io::measurement_to_json(&ms))
}

fn config_from(config: Option<&str>) -> PyResult<PipelineConfig> {
    match config {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(PipelineConfig::default()),
    }
}

/// Default pipeline configuration as JSON.
#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&PipelineConfig::default()).expect("config serializes")
}

/// Simulates both stages from `truth` and reconstructs; returns a
/// `report/1` JSON string.
#[pyfunction]
#[pyo3(signature = (truth, config=None))]
fn reconstruct(py: Python<'_>, truth: &PyPolygon, config: Option<&str>) -> PyResult<String> {
    let cfg = config_from(config)?;
    let t = truth.0.clone();
    let report = py.detach(move || pipelines::run(Input::Truth(&t), &cfg)).map_err(to_py)?;
    Ok(io::report_to_json(&report))
}

/// Reconstructs from two `meas/1` JSON strings.
#[pyfunction]
#[pyo3(signature = (first, second, config=None))]
fn reconstruct_measured(py: Python<'_>, first: &str, second: &str, config: Option<&str>) -> PyResult<String> {
    let mut cfg = config_from(config)?;
    let f = io::measurement_from_json(first).map_err(to_py)?;
    let s = io::measurement_from_json(second).map_err(to_py)?;
    cfg.k = s.k;
    cfg.first_k = Some(f.k);
    let report = py
        .detach(move || pipelines::run(Input::Measured { first: &f, second: &s }, &cfg))
        .map_err(to_py)?;
    Ok(io::report_to_json(&report))
}

/// Polygon held in a report.
#[pyfunction]
fn report_polygon(report: &str) -> PyResult<PyPolygon> {
    io::report_from_json(report).map(|r| PyPolygon(r.polygon)).map_err(to_py)
}

#[pymodule]
fn covrecon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolygon>()?;
    m.add_function(wrap_pyfunction!(hausdorff_distance, m)?)?;
    m.add_function(wrap_pyfunction!(synthesis_residual, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_measured, m)?)?;
    m.add_function(wrap_pyfunction!(report_polygon, m)?)?;
    Ok(())
}
