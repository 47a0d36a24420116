//! Python bindings: metrics, curvature, effective densities, bending and the
//! command-line pipelines.

use nalgebra::{Matrix2, Matrix3, Vector3};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::Value;

use prestrain::bending::{self, Immersion, MinimizeOptions, Seed};
use prestrain::catalog;
use prestrain::cli;
use prestrain::diffgeo::{self, CurvatureField, Thresholds};
use prestrain::effective::{q2_isotropic_closed, EffectiveDensityContext, IsotropicModuli, QuadraticForm3};
use prestrain::metric::{Grid2, MetricField, Point2, Rect};
use prestrain::scaling::{DensityKind, DensityW};
use prestrain::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        Error::Numerical(_) | Error::Consistency(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
    }
}

fn parse_json(s: Option<&str>) -> PyResult<Value> {
    match s {
        None => Ok(Value::Null),
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("invalid JSON: {e}"))),
    }
}

fn mat3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn from3(a: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

fn from2(a: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::from_fn(|i, j| a[i][j])
}

/// A catalog midplane metric on a rectangular domain.
#[pyclass(name = "Metric", frozen)]
pub struct PyMetric {
    inner: MetricField,
}

#[pymethods]
impl PyMetric {
    /// Builds a catalog metric; `params` is a JSON object, `domain` is `((a, b), (c, d))`.
    #[new]
    #[pyo3(signature = (name, params=None, domain=None))]
    fn new(name: &str, params: Option<&str>, domain: Option<([f64; 2], [f64; 2])>) -> PyResult<Self> {
        let params = parse_json(params)?;
        let domain = domain.map(|(x1, x2)| Rect { x1, x2 });
        Ok(PyMetric { inner: catalog::build(name, &params, domain).map_err(py_err)? })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        catalog::NAMES.to_vec()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn domain(&self) -> ([f64; 2], [f64; 2]) {
        (self.inner.domain.x1, self.inner.domain.x2)
    }

    fn g(&self, x1: f64, x2: f64) -> [[f64; 3]; 3] {
        mat3(&self.inner.g(Point2::new(x1, x2)))
    }

    /// Scalar curvature, `(R³₁₁₂, R³₂₂₁, R₁₂₁₂)` and in-plane Gaussian curvature at a point.
    fn curvature<'py>(&self, py: Python<'py>, x1: f64, x2: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = diffgeo::riemann(&self.inner, Point2::new(x1, x2)).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("scalar", r.scalar)?;
        d.set_item("triple", r.triple)?;
        d.set_item("kappa2d", r.kappa2d)?;
        d.set_item("ricci", mat3(&r.ric))?;
        Ok(d)
    }

    /// Target second fundamental form at a point.
    fn target_second_form(&self, x1: f64, x2: f64) -> PyResult<[[f64; 2]; 2]> {
        let p = diffgeo::target_second_form(&self.inner, Point2::new(x1, x2)).map_err(py_err)?;
        Ok([[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]])
    }

    /// Regime verdict on an `n × n` grid.
    #[pyo3(signature = (n=65, rel=1e-6))]
    fn classify<'py>(&self, py: Python<'py>, n: usize, rel: f64) -> PyResult<Bound<'py, PyDict>> {
        let grid = Grid2::square(self.inner.domain, n).map_err(py_err)?;
        let th = Thresholds { rel, tau: None };
        let v = py.detach(|| CurvatureField::compute(&self.inner, &grid).map(|f| f.classify(&th))).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("verdict", serde_json::to_value(v.verdict).map_err(|e| py_err(e.into()))?.as_str())?;
        d.set_item("riemann_sup", v.riemann_sup)?;
        d.set_item("triple_sup", v.triple_sup)?;
        d.set_item("kappa2d_sup", v.kappa2d_sup)?;
        d.set_item("tau", v.tau)?;
        Ok(d)
    }
}

/// Effective plate density `Q2(F)` at a metric value `G` for isotropic moduli.
#[pyfunction]
#[pyo3(signature = (g, f, mu=1.0, lam=1.0))]
fn q2(g: [[f64; 3]; 3], f: [[f64; 2]; 2], mu: f64, lam: f64) -> PyResult<f64> {
    let qf = QuadraticForm3::isotropic(mu, lam).map_err(py_err)?;
    let ctx = EffectiveDensityContext::new(&from3(g), &qf).map_err(py_err)?;
    Ok(ctx.q2_general(&from2(f)))
}

/// The three isotropic closed forms of `Q2`, checked against each other.
#[pyfunction]
#[pyo3(signature = (g, f, mu=1.0, lam=1.0))]
fn q2_closed_forms(g: [[f64; 3]; 3], f: [[f64; 2]; 2], mu: f64, lam: f64) -> PyResult<(f64, f64, f64)> {
    let m = IsotropicModuli::new(mu, lam).map_err(py_err)?;
    let q = q2_isotropic_closed(&from3(g), &m, &from2(f)).map_err(py_err)?;
    Ok((q.via_d, q.via_minor, q.via_c))
}

/// Stored-energy density `W(F)`; `kind` is `GREEN_QUADRATIC` or `DIST_SQ_SO3`.
#[pyfunction]
#[pyo3(signature = (f, kind="GREEN_QUADRATIC", mu=1.0, lam=1.0))]
fn density(f: [[f64; 3]; 3], kind: &str, mu: f64, lam: f64) -> PyResult<f64> {
    let kind: DensityKind = serde_json::from_value(Value::String(kind.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown density '{kind}'")))?;
    let w = DensityW::new(kind, IsotropicModuli::new(mu, lam).map_err(py_err)?).map_err(py_err)?;
    Ok(w.eval(&from3(f)))
}

fn seed_from(name: &str) -> PyResult<Seed> {
    serde_json::from_value(Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown seed shape '{name}'")))
}

fn result_dict<'py>(py: Python<'py>, r: &bending::BendingResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("energy", r.energy)?;
    d.set_item("isometry_residual", r.isometry_residual)?;
    d.set_item("degenerate_nodes", r.degenerate_nodes)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Discrete bending functional of a metric on an `n × n` grid.
#[pyclass(name = "BendingProblem", frozen)]
pub struct PyBendingProblem {
    inner: bending::BendingProblem,
    metric: MetricField,
}

#[pymethods]
impl PyBendingProblem {
    #[new]
    #[pyo3(signature = (metric, n=33, mu=1.0, lam=1.0))]
    fn new(metric: &PyMetric, n: usize, mu: f64, lam: f64) -> PyResult<Self> {
        let grid = Grid2::square(metric.inner.domain, n).map_err(py_err)?;
        let qf = QuadraticForm3::isotropic(mu, lam).map_err(py_err)?;
        let inner = bending::BendingProblem::new(&metric.inner, &qf, &grid).map_err(py_err)?;
        Ok(PyBendingProblem { inner, metric: metric.inner.clone() })
    }

    /// Node coordinates in node order (`x1` fastest).
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.grid.points().into_iter().map(|p| (p.x1, p.x2)).collect()
    }

    /// Seed immersion `flat`, `cylinder` or `paraboloid`, optionally perturbed.
    #[pyo3(signature = (shape="flat", noise=0.0, rng_seed=0))]
    fn seed(&self, shape: &str, noise: f64, rng_seed: u64) -> PyResult<Vec<[f64; 3]>> {
        let y = Immersion::seeded(self.inner.grid, seed_from(shape)?).with_noise(noise, rng_seed);
        Ok(y.y.iter().map(|v| [v.x, v.y, v.z]).collect())
    }

    fn energy<'py>(&self, py: Python<'py>, y: Vec<[f64; 3]>) -> PyResult<Bound<'py, PyDict>> {
        let imm = self.immersion(y)?;
        let r = self.inner.energy(&imm).map_err(py_err)?;
        result_dict(py, &r)
    }

    /// Penalized minimization from `y`; returns the final nodes and a summary.
    #[pyo3(signature = (y, max_iter=500, schedule=None))]
    fn minimize<'py>(
        &self,
        py: Python<'py>,
        y: Vec<[f64; 3]>,
        max_iter: usize,
        schedule: Option<Vec<f64>>,
    ) -> PyResult<(Vec<[f64; 3]>, Bound<'py, PyDict>)> {
        let imm = self.immersion(y)?;
        let mut opts = MinimizeOptions { max_iter, ..Default::default() };
        if let Some(s) = schedule {
            opts.schedule = s;
        }
        opts.validate().map_err(py_err)?;
        let rep = py.detach(|| bending::minimize_bending(&self.inner, &imm, &opts)).map_err(py_err)?;
        let nodes = rep.immersion.y.iter().map(|v| [v.x, v.y, v.z]).collect();
        Ok((nodes, result_dict(py, &rep.result)?))
    }

    fn isometry_residual(&self, y: Vec<[f64; 3]>) -> PyResult<f64> {
        Ok(self.immersion(y)?.isometry_residual(&self.metric))
    }
}

impl PyBendingProblem {
    fn immersion(&self, y: Vec<[f64; 3]>) -> PyResult<Immersion> {
        if y.len() != self.inner.grid.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} nodes, got {}",
                self.inner.grid.len(),
                y.len()
            )));
        }
        Ok(Immersion { grid: self.inner.grid, y: y.into_iter().map(Vector3::from).collect() })
    }
}

/// Runs a command-line pipeline (`classify`, `q2`, `bend`, `scale`, `nematic`)
/// on a JSON config and returns the report as JSON.
#[pyfunction]
fn run(py: Python<'_>, subcommand: &str, config: &str) -> PyResult<String> {
    let cfg = parse_json(Some(config))?;
    let command = cli::command_named(subcommand).map_err(py_err)?;
    let out = py.detach(|| cli::execute(&command, cfg)).map_err(py_err)?;
    serde_json::to_string(&out.report).map_err(|e| py_err(e.into()))
}

#[pymodule]
pub fn prestrain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PyBendingProblem>()?;
    m.add_function(wrap_pyfunction!(q2, m)?)?;
    m.add_function(wrap_pyfunction!(q2_closed_forms, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
