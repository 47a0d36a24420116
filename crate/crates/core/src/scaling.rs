//! Full three-dimensional energy of explicit deformations of the thin plate,
//! the recovery sequences used as upper-bound constructions, and power-law fits.

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bending::{cosserat_vector, Immersion};
use crate::effective::{EffectiveDensityContext, IsotropicModuli, QuadraticForm3};
use crate::error::{Error, Result};
use crate::field::ScalarSpec;
use crate::jet::Jet;
use crate::metric::{metric_sqrt, Grid2, MetricField, Point2, Rect};
use crate::stencil;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DensityKind {
    /// `(μ/8)|FᵀF − I|² + (λ/8)(tr(FᵀF − I))²`.
    #[default]
    GreenQuadratic,
    /// `(μ/2) dist²(F, SO(3))`.
    DistSqSo3,
}

/// Stored-energy density, normalized so that `W(I + tE) = (t²/2) Q₃(E) + O(t³)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityW {
    pub kind: DensityKind,
    pub moduli: IsotropicModuli,
}

impl DensityW {
    pub fn new(kind: DensityKind, moduli: IsotropicModuli) -> Result<Self> {
        moduli.validate()?;
        Ok(DensityW { kind, moduli })
    }

    pub fn eval(&self, f: &Matrix3<f64>) -> f64 {
        let IsotropicModuli { mu, lambda } = self.moduli;
        match self.kind {
            DensityKind::GreenQuadratic => {
                let c = f.transpose() * f - Matrix3::identity();
                0.125 * mu * c.norm_squared() + 0.125 * lambda * c.trace().powi(2)
            }
            DensityKind::DistSqSo3 => 0.5 * mu * dist_sq_so3(f),
        }
    }

    /// `D²W(Id)` as a quadratic form.
    pub fn quadratic_form(&self) -> QuadraticForm3 {
        match self.kind {
            DensityKind::GreenQuadratic => QuadraticForm3::Isotropic(self.moduli),
            DensityKind::DistSqSo3 => QuadraticForm3::Isotropic(IsotropicModuli { mu: self.moduli.mu, lambda: 0.0 }),
        }
    }
}

/// Squared distance from `f` to the rotation group.
pub fn dist_sq_so3(f: &Matrix3<f64>) -> f64 {
    let mut s: Vec<f64> = f.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if f.determinant() < 0.0 {
        s[2] = -s[2];
    }
    s.iter().map(|v| (v - 1.0).powi(2)).sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by the Golub–Welsch eigenproblem.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::validation("quadrature order must be positive"));
    }
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// A deformation of the reference plate `Ω × (−h/2, h/2)` with its gradient.
pub trait Deformation3: Send + Sync {
    fn label(&self) -> &str;
    fn eval(&self, p: Point2, x3: f64) -> Vector3<f64>;
    /// Columns are `∂1u, ∂2u, ∂3u`.
    fn grad(&self, p: Point2, x3: f64) -> Matrix3<f64>;
}

/// `u(x′, x₃) = (x′, 0)`.
pub struct IdentityEmbedding;

impl Deformation3 for IdentityEmbedding {
    fn label(&self) -> &str {
        "identity"
    }
    fn eval(&self, p: Point2, x3: f64) -> Vector3<f64> {
        Vector3::new(p.x1, p.x2, x3)
    }
    fn grad(&self, _: Point2, _: f64) -> Matrix3<f64> {
        Matrix3::identity()
    }
}

fn check_positive(lambda: &ScalarSpec, domain: &Rect) -> Result<()> {
    let grid = Grid2::square(*domain, 17)?;
    for p in grid.points() {
        let v = lambda.value(p.x1, p.x2);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("λ must be positive on Ω (λ = {v} at ({}, {}))", p.x1, p.x2)));
        }
    }
    Ok(())
}

/// `u = x′ + (−(x₃²/4)∂₁λ, −(x₃²/4)∂₂λ, √λ x₃)`, for `G = diag(1, 1, λ)`.
pub struct KokoRecovery {
    lambda: ScalarSpec,
}

impl KokoRecovery {
    pub fn new(lambda: ScalarSpec, domain: &Rect) -> Result<Self> {
        check_positive(&lambda, domain)?;
        Ok(KokoRecovery { lambda })
    }
}

impl Deformation3 for KokoRecovery {
    fn label(&self) -> &str {
        "koko"
    }
    fn eval(&self, p: Point2, x3: f64) -> Vector3<f64> {
        let l = self.lambda.jet_at(p.x1, p.x2);
        let q = 0.25 * x3 * x3;
        Vector3::new(p.x1 - q * l.d[0], p.x2 - q * l.d[1], l.v.sqrt() * x3)
    }
    fn grad(&self, p: Point2, x3: f64) -> Matrix3<f64> {
        let l = self.lambda.jet_at(p.x1, p.x2);
        let s = l.sqrt();
        let q = 0.25 * x3 * x3;
        Matrix3::new(
            1.0 - q * l.dd[0][0], -q * l.dd[0][1], -0.5 * x3 * l.d[0],
            -q * l.dd[1][0], 1.0 - q * l.dd[1][1], -0.5 * x3 * l.d[1],
            x3 * s.d[0], x3 * s.d[1], s.v,
        )
    }
}

/// Conformal flat immersion `y: Ω → ℝ²` with `(∇y)ᵀ∇y = λ Id₂` for
/// `λ = a exp(k·x′)` (including constant `λ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalImmersion {
    a: f64,
    k: [f64; 2],
}

impl ConformalImmersion {
    pub fn for_lambda(lambda: &ScalarSpec) -> Result<Self> {
        match *lambda {
            ScalarSpec::Constant(c) if c > 0.0 => Ok(ConformalImmersion { a: c, k: [0.0, 0.0] }),
            ScalarSpec::ExpLinear([a, k1, k2]) if a > 0.0 => Ok(ConformalImmersion { a, k: [k1, k2] }),
            _ => Err(Error::validation(
                "the flat immersion is available in closed form only for λ = a·exp(k1 x1 + k2 x2) with a > 0",
            )),
        }
    }

    pub fn eval_jet(&self, x1: Jet, x2: Jet) -> [Jet; 2] {
        let [k1, k2] = self.k;
        let kk = k1 * k1 + k2 * k2;
        if kk == 0.0 {
            let s = self.a.sqrt();
            return [x1 * s, x2 * s];
        }
        let c = 2.0 * self.a.sqrt() / kk;
        let p = (x1 * k1 + x2 * k2) * 0.5;
        let q = (x2 * k1 - x1 * k2) * 0.5;
        let e = p.exp() * c;
        let (cq, sq) = (q.cos(), q.sin());
        [e * (cq * k1 - sq * k2), e * (sq * k1 + cq * k2)]
    }
}

/// `u = y* + x₃√λ e₃ − (x₃²/4)((∇y)^{-T}∇λ)*` for `G = λ Id₃` with `Δ log λ = 0`.
pub struct CiagRecovery {
    lambda: ScalarSpec,
    y: ConformalImmersion,
}

impl CiagRecovery {
    pub fn new(lambda: ScalarSpec, domain: &Rect) -> Result<Self> {
        check_positive(&lambda, domain)?;
        let y = ConformalImmersion::for_lambda(&lambda)?;
        Ok(CiagRecovery { lambda, y })
    }

    /// `(y, ∇y, v = (∇y)^{-T}∇λ, ∂_a v, λ)`.
    fn parts(&self, p: Point2) -> (Vector2<f64>, Matrix2<f64>, Vector2<f64>, [Vector2<f64>; 2], Jet) {
        let (x1, x2) = Jet::coords(p.x1, p.x2);
        let y = self.y.eval_jet(x1, x2);
        let l = self.lambda.eval_jet(x1, x2);
        let j = Matrix2::new(y[0].d[0], y[0].d[1], y[1].d[0], y[1].d[1]);
        let jit = j.try_inverse().expect("conformal immersion has invertible gradient").transpose();
        let gl = Vector2::new(l.d[0], l.d[1]);
        let v = jit * gl;
        let dv = [0, 1].map(|a| {
            let dj = Matrix2::new(y[0].dd[0][a], y[0].dd[1][a], y[1].dd[0][a], y[1].dd[1][a]);
            let dgl = Vector2::new(l.dd[0][a], l.dd[1][a]);
            -jit * dj.transpose() * v + jit * dgl
        });
        (Vector2::new(y[0].v, y[1].v), j, v, dv, l)
    }
}

impl Deformation3 for CiagRecovery {
    fn label(&self) -> &str {
        "ciag"
    }
    fn eval(&self, p: Point2, x3: f64) -> Vector3<f64> {
        let (y, _, v, _, l) = self.parts(p);
        let q = 0.25 * x3 * x3;
        Vector3::new(y[0] - q * v[0], y[1] - q * v[1], x3 * l.v.sqrt())
    }
    fn grad(&self, p: Point2, x3: f64) -> Matrix3<f64> {
        let (_, j, v, dv, l) = self.parts(p);
        let s = l.sqrt();
        let q = 0.25 * x3 * x3;
        Matrix3::new(
            j[(0, 0)] - q * dv[0][0], j[(0, 1)] - q * dv[1][0], -0.5 * x3 * v[0],
            j[(1, 0)] - q * dv[0][1], j[(1, 1)] - q * dv[1][1], -0.5 * x3 * v[1],
            x3 * s.d[0], x3 * s.d[1], s.v,
        )
    }
}

/// Nodal fields of the Kirchhoff recovery `u = y + x₃b + (x₃²/2)d`.
#[derive(Clone, Copy, Debug)]
struct KirchhoffNode {
    y: Vector3<f64>,
    dy: [Vector3<f64>; 2],
    b: Vector3<f64>,
    db: [Vector3<f64>; 2],
    d: Vector3<f64>,
    dd: [Vector3<f64>; 2],
}

/// Recovery sequence built from an immersion: `b` is the Cosserat vector and
/// `d = Q^{-T}(c((∇y)ᵀ∇b) − (½∇|b|², 0))` with `Q = [∂₁y, ∂₂y, b]`.
pub struct KirchhoffRecovery {
    grid: Grid2,
    nodes: Vec<KirchhoffNode>,
}

impl KirchhoffRecovery {
    pub fn new(metric: &MetricField, qf: &QuadraticForm3, imm: &Immersion) -> Result<Self> {
        let grid = imm.grid;
        let [d1, d2] = imm.tangents();
        let b = (0..grid.len())
            .map(|k| {
                cosserat_vector(&metric.g(grid.point(k)), &d1[k], &d2[k]).map_err(|_| {
                    let p = grid.point(k);
                    Error::validation(format!("degenerate frame at node ({}, {})", p.x1, p.x2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let db = [stencil::diff(&grid, &b, 0), stencil::diff(&grid, &b, 1)];
        let d = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let g = metric.g(grid.point(k));
                let ctx = EffectiveDensityContext::new(&g, qf)?;
                let f = Matrix2::from_fn(|i, j| [d1[k], d2[k]][i].dot(&db[j][k]));
                let c = ctx.minimizer_c0(&f);
                let rhs = c - Vector3::new(b[k].dot(&db[0][k]), b[k].dot(&db[1][k]), 0.0);
                let q = Matrix3::from_columns(&[d1[k], d2[k], b[k]]);
                q.transpose()
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::numerical("singular frame in the warping field"))
            })
            .collect::<Result<Vec<_>>>()?;
        let dd = [stencil::diff(&grid, &d, 0), stencil::diff(&grid, &d, 1)];
        let nodes = (0..grid.len())
            .map(|k| KirchhoffNode {
                y: imm.y[k],
                dy: [d1[k], d2[k]],
                b: b[k],
                db: [db[0][k], db[1][k]],
                d: d[k],
                dd: [dd[0][k], dd[1][k]],
            })
            .collect();
        Ok(KirchhoffRecovery { grid, nodes })
    }

    /// Nodal Cosserat vector and warping field.
    pub fn node_fields(&self, k: usize) -> (Vector3<f64>, Vector3<f64>) {
        (self.nodes[k].b, self.nodes[k].d)
    }

    /// Tensor-product cubic interpolation of a nodal quantity.
    fn interpolate<F: Fn(&KirchhoffNode) -> Vector3<f64>>(&self, p: Point2, f: F) -> Vector3<f64> {
        let wx = cubic_weights(self.grid.nx, self.grid.rect.x1[0], self.grid.dx(), p.x1);
        let wy = cubic_weights(self.grid.ny, self.grid.rect.x2[0], self.grid.dy(), p.x2);
        let mut out = Vector3::zeros();
        for &(j, wj) in &wy {
            for &(i, wi) in &wx {
                out += f(&self.nodes[self.grid.index(i, j)]) * (wi * wj);
            }
        }
        out
    }
}

/// Lagrange weights of the four nodes nearest to `x` on a uniform axis.
fn cubic_weights(n: usize, x0: f64, h: f64, x: f64) -> [(usize, f64); 4] {
    let t = (x - x0) / h;
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut out = [(0, 0.0); 4];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut w = 1.0;
        for l in 0..4 {
            if l != m {
                w *= (t - (base + l) as f64) / (m as f64 - l as f64);
            }
        }
        *slot = (base + m, w);
    }
    out
}

impl Deformation3 for KirchhoffRecovery {
    fn label(&self) -> &str {
        "kirchhoff"
    }
    fn eval(&self, p: Point2, x3: f64) -> Vector3<f64> {
        self.interpolate(p, |n| n.y + n.b * x3 + n.d * (0.5 * x3 * x3))
    }
    fn grad(&self, p: Point2, x3: f64) -> Matrix3<f64> {
        let q = 0.5 * x3 * x3;
        let c1 = self.interpolate(p, |n| n.dy[0] + n.db[0] * x3 + n.dd[0] * q);
        let c2 = self.interpolate(p, |n| n.dy[1] + n.db[1] * x3 + n.dd[1] * q);
        let c3 = self.interpolate(p, |n| n.b + n.d * x3);
        Matrix3::from_columns(&[c1, c2, c3])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadOrders {
    /// In-plane cells per axis.
    pub cells: usize,
    /// Gauss points per cell and axis.
    pub q1: usize,
    /// Gauss points through the thickness.
    pub q3: usize,
}

impl Default for QuadOrders {
    fn default() -> Self {
        QuadOrders { cells: 32, q1: 4, q3: 6 }
    }
}

/// `Eʰ(u) = (1/h) ∫_{Ω×(−h/2, h/2)} W(∇u √G⁻¹)` over the metric's domain.
pub fn energy_3d(metric: &MetricField, w: &DensityW, u: &dyn Deformation3, h: f64, quad: &QuadOrders) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation("thickness h must be positive"));
    }
    if quad.cells == 0 {
        return Err(Error::validation("quadrature needs at least one cell"));
    }
    let (gx, gw) = gauss_legendre(quad.q1)?;
    let (tx, tw) = gauss_legendre(quad.q3)?;
    let rect = metric.domain;
    let hx = (rect.x1[1] - rect.x1[0]) / quad.cells as f64;
    let hy = (rect.x2[1] - rect.x2[0]) / quad.cells as f64;
    let cell_sums = (0..quad.cells * quad.cells)
        .into_par_iter()
        .map(|c| {
            let (ci, cj) = (c % quad.cells, c / quad.cells);
            let mut sum = 0.0;
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    let p = Point2::new(
                        rect.x1[0] + hx * (ci as f64 + 0.5 * (a + 1.0)),
                        rect.x2[0] + hy * (cj as f64 + 0.5 * (b + 1.0)),
                    );
                    let a_inv = metric_sqrt(&metric.g(p))?
                        .try_inverse()
                        .ok_or_else(|| Error::numerical("singular metric square root"))?;
                    let mut inner = 0.0;
                    for (t, wt) in tx.iter().zip(&tw) {
                        let f = u.grad(p, 0.5 * h * t) * a_inv;
                        inner += 0.5 * wt * w.eval(&f);
                    }
                    sum += 0.25 * wa * wb * hx * hy * inner;
                }
            }
            if sum.is_finite() {
                Ok(sum)
            } else {
                Err(Error::numerical("non-finite energy density during quadrature"))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(cell_sums.iter().sum())
}

/// `h = 2^{-k}` for `k` in `lo..=hi`.
pub fn dyadic_thicknesses(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

pub fn sweep(metric: &MetricField, w: &DensityW, u: &dyn Deformation3, hs: &[f64], quad: &QuadOrders) -> Result<Vec<(f64, f64)>> {
    hs.iter().map(|&h| Ok((h, energy_3d(metric, w, u, h, quad)?))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of `log Eʰ` against `log h`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: Option<f64>,
    /// Every sample was exactly zero.
    pub exact: bool,
    /// Some samples were not positive and were left out of the fit.
    pub partial: bool,
}

/// Fits `Eʰ ≈ C hᵖ`; needs at least four samples with strictly decreasing `h`.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingReport> {
    if samples.len() < 4 {
        return Err(Error::validation("scaling fit needs at least 4 samples"));
    }
    if samples.iter().any(|&(h, e)| !(h > 0.0) || !e.is_finite() || e < 0.0) {
        return Err(Error::validation("samples need h > 0 and finite E ≥ 0"));
    }
    if samples.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::validation("h must be strictly decreasing"));
    }
    let pos: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > 0.0).map(|&(h, e)| (h.ln(), e.ln())).collect();
    let mut rep = ScalingReport {
        samples: samples.to_vec(),
        slope: None,
        intercept: None,
        residual: None,
        exact: pos.is_empty(),
        partial: !pos.is_empty() && pos.len() < samples.len(),
    };
    if rep.exact {
        return Ok(rep);
    }
    if pos.len() < 2 {
        return Err(Error::numerical("fewer than two positive energies; no slope can be fitted"));
    }
    let n = pos.len() as f64;
    let mx = pos.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = (pos.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    rep.slope = Some(slope);
    rep.intercept = Some(intercept);
    rep.residual = Some(res);
    Ok(rep)
}
