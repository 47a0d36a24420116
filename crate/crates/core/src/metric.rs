//! Midplane metric fields `G(x')` and their pointwise algebra.
//!
//! A metric never sees the thickness coordinate: every evaluator takes a
//! [`Point2`] only, so thickness independence holds by construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Relative eigenvalue floor used to accept a matrix as positive definite.
pub const SPD_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }

    pub fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x1
        } else {
            self.x2
        }
    }

    pub fn shifted(&self, axis: usize, by: f64) -> Self {
        let mut p = *self;
        if axis == 0 {
            p.x1 += by;
        } else {
            p.x2 += by;
        }
        p
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
}

impl Rect {
    pub const UNIT: Rect = Rect { x1: [0.0, 1.0], x2: [0.0, 1.0] };

    pub fn new(x1: [f64; 2], x2: [f64; 2]) -> Result<Self> {
        let r = Rect { x1, x2 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |iv: [f64; 2]| iv[0].is_finite() && iv[1].is_finite() && iv[0] < iv[1];
        if !ok(self.x1) || !ok(self.x2) {
            return Err(Error::validation(format!("degenerate rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        let a = self.x1[1] - self.x1[0];
        let b = self.x2[1] - self.x2[0];
        a.hypot(b)
    }

    pub fn range(&self, axis: usize) -> [f64; 2] {
        if axis == 0 {
            self.x1
        } else {
            self.x2
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        let eps = 1e-12 * self.diameter();
        p.x1 >= self.x1[0] - eps
            && p.x1 <= self.x1[1] + eps
            && p.x2 >= self.x2[0] - eps
            && p.x2 <= self.x2[1] + eps
    }

    pub fn contains_origin(&self) -> bool {
        self.x1[0] <= 0.0 && self.x1[1] >= 0.0 && self.x2[0] <= 0.0 && self.x2[1] >= 0.0
    }
}

/// Uniform tensor grid covering a rectangle, boundary nodes included.
/// Nodes are numbered with `x1` varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub const MIN_NODES: usize = 5;

    pub fn new(rect: Rect, nx: usize, ny: usize) -> Result<Self> {
        rect.validate()?;
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::validation(format!(
                "grid needs at least {} nodes per axis, got {nx}x{ny}",
                Self::MIN_NODES
            )));
        }
        Ok(Grid2 { rect, nx, ny })
    }

    pub fn square(rect: Rect, n: usize) -> Result<Self> {
        Self::new(rect, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.rect.x1[1] - self.rect.x1[0]) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.rect.x2[1] - self.rect.x2[0]) / (self.ny - 1) as f64
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.dx()
        } else {
            self.dy()
        }
    }

    pub fn count(&self, axis: usize) -> usize {
        if axis == 0 {
            self.nx
        } else {
            self.ny
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn node(&self, i: usize, j: usize) -> Point2 {
        // Endpoints are hit exactly so boundary nodes never fall outside the rectangle.
        let t = |lo: f64, hi: f64, k: usize, n: usize| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        Point2::new(
            t(self.rect.x1[0], self.rect.x1[1], i, self.nx),
            t(self.rect.x2[0], self.rect.x2[1], j, self.ny),
        )
    }

    pub fn point(&self, k: usize) -> Point2 {
        let (i, j) = self.ij(k);
        self.node(i, j)
    }

    pub fn points(&self) -> Vec<Point2> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Composite trapezoid weight of node `k`.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let (i, j) = self.ij(k);
        let w = |idx: usize, n: usize, h: f64| if idx == 0 || idx == n - 1 { 0.5 * h } else { h };
        w(i, self.nx, self.dx()) * w(j, self.ny, self.dy())
    }

    /// True if some node coincides with the origin or the rectangle straddles it.
    pub fn touches_origin(&self) -> bool {
        self.rect.contains_origin()
    }
}

/// Metric entries as jets in `(x1, x2)`.
pub type JetMatrix = [[Jet; 3]; 3];

type JetMetricFn = dyn Fn(Jet, Jet) -> JetMatrix + Send + Sync;
type ValueMetricFn = dyn Fn(Point2) -> Matrix3<f64> + Send + Sync;

#[derive(Clone)]
enum Source {
    /// Closed form written over jets; derivatives are exact.
    Analytic(Arc<JetMetricFn>),
    /// Values only; derivatives by finite differences.
    Values(Arc<ValueMetricFn>),
    Sampled(Arc<SampledMetric>),
}

/// Metric tabulated on grid nodes, bilinearly interpolated in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledMetric {
    pub grid: Grid2,
    /// Row-major 3x3 entries, one per node, `x1` fastest.
    pub samples: Vec<[f64; 9]>,
}

impl SampledMetric {
    pub fn new(grid: Grid2, samples: Vec<[f64; 9]>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::validation(format!(
                "expected {} metric samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            let m = Matrix3::from_row_slice(s);
            if (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
                return Err(Error::validation(format!("metric sample {k} is not symmetric")));
            }
            check_spd(&m).map_err(|e| Error::validation(format!("metric sample {k}: {e}")))?;
        }
        Ok(SampledMetric { grid, samples })
    }

    pub fn value(&self, p: Point2) -> Matrix3<f64> {
        let g = &self.grid;
        let locate = |x: f64, lo: f64, h: f64, n: usize| {
            let t = ((x - lo) / h).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            (i, t - i as f64)
        };
        let (i, s) = locate(p.x1, g.rect.x1[0], g.dx(), g.nx);
        let (j, t) = locate(p.x2, g.rect.x2[0], g.dy(), g.ny);
        let at = |i: usize, j: usize| Matrix3::from_row_slice(&self.samples[g.index(i, j)]);
        at(i, j) * ((1.0 - s) * (1.0 - t))
            + at(i + 1, j) * (s * (1.0 - t))
            + at(i, j + 1) * ((1.0 - s) * t)
            + at(i + 1, j + 1) * (s * t)
    }
}

/// A midplane metric with its domain.
#[derive(Clone)]
pub struct MetricField {
    pub label: String,
    pub domain: Rect,
    source: Source,
    fd_step: Option<f64>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("analytic", &self.has_analytic_derivatives())
            .finish()
    }
}

/// Metric value and derivatives at a single point.
#[derive(Clone, Copy, Debug)]
pub struct LocalMetric {
    pub p: Point2,
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    /// `dg[a] = ∂_a G`.
    pub dg: [Matrix3<f64>; 2],
    /// `ddg[a][b] = ∂_a ∂_b G`.
    pub ddg: [[Matrix3<f64>; 2]; 2],
}

impl LocalMetric {
    /// `∂_a G` for `a` in 0..3; the thickness direction is identically zero.
    #[inline]
    pub fn d(&self, a: usize) -> Matrix3<f64> {
        if a < 2 {
            self.dg[a]
        } else {
            Matrix3::zeros()
        }
    }

    #[inline]
    pub fn dd(&self, a: usize, b: usize) -> Matrix3<f64> {
        if a < 2 && b < 2 {
            self.ddg[a][b]
        } else {
            Matrix3::zeros()
        }
    }

    /// Largest Frobenius norm among first derivatives.
    pub fn first_derivative_norm(&self) -> f64 {
        self.dg.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn second_derivative_norm(&self) -> f64 {
        self.ddg.iter().flatten().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

impl MetricField {
    pub fn analytic<F>(label: impl Into<String>, domain: Rect, f: F) -> Self
    where
        F: Fn(Jet, Jet) -> JetMatrix + Send + Sync + 'static,
    {
        MetricField {
            label: label.into(),
            domain,
            source: Source::Analytic(Arc::new(f)),
            fd_step: None,
        }
    }

    /// A metric known only through its values; derivatives use finite differences.
    pub fn from_values<F>(label: impl Into<String>, domain: Rect, f: F) -> Self
    where
        F: Fn(Point2) -> Matrix3<f64> + Send + Sync + 'static,
    {
        MetricField {
            label: label.into(),
            domain,
            source: Source::Values(Arc::new(f)),
            fd_step: None,
        }
    }

    pub fn sampled(label: impl Into<String>, sampled: SampledMetric) -> Self {
        MetricField {
            label: label.into(),
            domain: sampled.grid.rect,
            source: Source::Sampled(Arc::new(sampled)),
            fd_step: None,
        }
    }

    /// Same metric with its derivatives forced through finite differences.
    pub fn values_only(&self) -> Self {
        let this = self.clone();
        let mut out = MetricField::from_values(self.label.clone(), self.domain, move |p| this.g(p));
        out.fd_step = self.fd_step;
        out
    }

    pub fn with_domain(mut self, domain: Rect) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        matches!(self.source, Source::Analytic(_))
    }

    /// Finite-difference step; defaults to `1e-4` times the domain diameter.
    pub fn fd_step(&self) -> f64 {
        self.fd_step.unwrap_or(1e-4 * self.domain.diameter())
    }

    /// Metric value at `p`. Analytic metrics evaluate their formula anywhere;
    /// sampled metrics clamp to their grid.
    pub fn g(&self, p: Point2) -> Matrix3<f64> {
        match &self.source {
            Source::Analytic(f) => {
                let m = f(Jet::constant(p.x1), Jet::constant(p.x2));
                Matrix3::from_fn(|i, j| m[i][j].v)
            }
            Source::Values(f) => f(p),
            Source::Sampled(s) => s.value(p),
        }
    }

    /// Entries as jets, if the metric is analytic.
    pub fn jet(&self, p: Point2) -> Option<JetMatrix> {
        match &self.source {
            Source::Analytic(f) => {
                let (a, b) = Jet::coords(p.x1, p.x2);
                Some(f(a, b))
            }
            _ => None,
        }
    }

    fn require_inside(&self, p: Point2) -> Result<()> {
        if !self.domain.contains(p) {
            return Err(Error::validation(format!(
                "point ({}, {}) lies outside the domain {:?} of metric '{}'",
                p.x1, p.x2, self.domain, self.label
            )));
        }
        Ok(())
    }

    /// First derivatives `(∂1 G, ∂2 G)` at `p`: exact for analytic metrics,
    /// second-order finite differences otherwise.
    pub fn derivatives(&self, p: Point2) -> Result<[Matrix3<f64>; 2]> {
        self.require_inside(p)?;
        if let Some(m) = self.jet(p) {
            return Ok([0, 1].map(|a| Matrix3::from_fn(|i, j| m[i][j].d[a])));
        }
        self.derivatives_fd(p, self.fd_step())
    }

    /// Second-order finite-difference first derivatives with step `h`,
    /// one-sided near the boundary of the domain.
    pub fn derivatives_fd(&self, p: Point2, h: f64) -> Result<[Matrix3<f64>; 2]> {
        self.require_inside(p)?;
        let f = |q: Point2| Ok(self.g(q));
        Ok([fd_first(&f, &self.domain, p, 0, h)?, fd_first(&f, &self.domain, p, 1, h)?])
    }

    /// Value, inverse and first two derivatives at `p`, after an SPD check.
    pub fn local(&self, p: Point2) -> Result<LocalMetric> {
        self.require_inside(p)?;
        let (g, dg, ddg) = if let Some(m) = self.jet(p) {
            let g = Matrix3::from_fn(|i, j| m[i][j].v);
            let dg = [0, 1].map(|a| Matrix3::from_fn(|i, j| m[i][j].d[a]));
            let ddg = [0, 1].map(|a| [0, 1].map(|b| Matrix3::from_fn(|i, j| m[i][j].dd[a][b])));
            (g, dg, ddg)
        } else {
            let h = self.fd_step();
            let g = self.g(p);
            let dg = self.derivatives_fd(p, h)?;
            // Nested differences with a widened outer step.
            let h2 = 10.0 * h;
            let mut ddg = [[Matrix3::zeros(); 2]; 2];
            for a in 0..2 {
                let da = |q: Point2| {
                    let f = |r: Point2| Ok(self.g(r));
                    fd_first(&f, &self.domain, q, a, h)
                };
                for b in 0..2 {
                    ddg[a][b] = fd_first(&da, &self.domain, p, b, h2)?;
                }
            }
            for a in 0..2 {
                for b in 0..a {
                    let s = (ddg[a][b] + ddg[b][a]) * 0.5;
                    ddg[a][b] = s;
                    ddg[b][a] = s;
                }
            }
            (g, dg, ddg)
        };
        let g = symmetrize(&g);
        check_spd(&g).map_err(|e| {
            Error::validation(format!("metric '{}' at ({}, {}): {e}", self.label, p.x1, p.x2))
        })?;
        let g_inv = g
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular metric"))?;
        Ok(LocalMetric { p, g, g_inv, dg, ddg })
    }

    /// Checks symmetry and positive definiteness on every node of `grid`.
    pub fn validate_on(&self, grid: &Grid2) -> Result<()> {
        for p in grid.points() {
            let g = self.g(p);
            if (g - g.transpose()).abs().max() > 1e-12 * (1.0 + g.abs().max()) {
                return Err(Error::validation(format!(
                    "metric '{}' not symmetric at ({}, {})",
                    self.label, p.x1, p.x2
                )));
            }
            check_spd(&g)?;
        }
        Ok(())
    }
}

/// One-sided or central second-order first derivative of `f` along `axis`.
pub(crate) fn fd_first<F>(f: &F, domain: &Rect, p: Point2, axis: usize, h: f64) -> Result<Matrix3<f64>>
where
    F: Fn(Point2) -> Result<Matrix3<f64>>,
{
    let [lo, hi] = domain.range(axis);
    let x = p.coord(axis);
    let eps = 1e-12 * domain.diameter();
    if x - h >= lo - eps && x + h <= hi + eps {
        Ok((f(p.shifted(axis, h))? - f(p.shifted(axis, -h))?) / (2.0 * h))
    } else if x + 2.0 * h <= hi + eps {
        Ok((f(p)? * -3.0 + f(p.shifted(axis, h))? * 4.0 - f(p.shifted(axis, 2.0 * h))?) / (2.0 * h))
    } else if x - 2.0 * h >= lo - eps {
        Ok((f(p)? * 3.0 - f(p.shifted(axis, -h))? * 4.0 + f(p.shifted(axis, -2.0 * h))?) / (2.0 * h))
    } else {
        Err(Error::validation(format!(
            "finite-difference step {h} does not fit in the domain along axis {axis}"
        )))
    }
}

pub fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Rejects matrices whose smallest eigenvalue is not safely positive.
pub fn check_spd(g: &Matrix3<f64>) -> Result<()> {
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let eig = SymmetricEigen::new(symmetrize(g)).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if max <= 0.0 || min < SPD_REL_TOL * max {
        return Err(Error::validation(format!(
            "matrix is not positive definite (eigenvalues {min:e} .. {max:e})"
        )));
    }
    Ok(())
}

/// Positive definite symmetric square root by spectral decomposition.
pub fn metric_sqrt(g: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    check_spd(g)?;
    let eig = SymmetricEigen::new(symmetrize(g));
    let q = eig.eigenvectors;
    let s = Matrix3::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(symmetrize(&(q * s * q.transpose())))
}

/// Positive definite symmetric square root of a 2x2 SPD matrix.
pub fn sqrt_spd2(g: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    // For 2x2 SPD: sqrt(G) = (G + sqrt(det G) I) / sqrt(tr G + 2 sqrt(det G)).
    let det = g.determinant();
    let tr = g.trace();
    if !(det > 0.0 && tr > 0.0) {
        return Err(Error::validation("2x2 matrix is not positive definite"));
    }
    let s = det.sqrt();
    Ok((g + Matrix2::identity() * s) / (tr + 2.0 * s).sqrt())
}

pub fn principal_minor_2x2(g: &Matrix3<f64>) -> Matrix2<f64> {
    g.fixed_view::<2, 2>(0, 0).into_owned()
}

/// Zero-padded embedding `F*` of a 2x2 block into a 3x3 matrix.
pub fn embed_star(f: &Matrix2<f64>) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(f);
    m
}

pub fn e3() -> Vector3<f64> {
    Vector3::z()
}
