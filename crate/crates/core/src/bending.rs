//! Discrete immersions of the midplane, the Cosserat vector, the Kirchhoff
//! bending functional and its penalized minimization.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandedSpd;
use crate::effective::{q2_coords, EffectiveDensityContext, QuadraticForm3};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions, Termination};
use crate::metric::{principal_minor_2x2, Grid2, MetricField, Point2};
use crate::stencil;

/// Tangent planes with `|∂1y × ∂2y|` below this are treated as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `b = ∇y G₂ₓ₂⁻¹ (G13, G23)ᵀ + √(det G / det G₂ₓ₂) N`.
pub fn cosserat_vector(g: &Matrix3<f64>, d1: &Vector3<f64>, d2: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = d1.cross(d2);
    let len = n.norm();
    if len < DEGENERATE_TOL {
        return Err(Error::numerical("degenerate tangent plane"));
    }
    let (a, s) = frame_coefficients(g)?;
    Ok(d1 * a[0] + d2 * a[1] + n * (s / len))
}

/// `(G₂ₓ₂⁻¹ (G13, G23), √(det G / det G₂ₓ₂))`.
pub fn frame_coefficients(g: &Matrix3<f64>) -> Result<(Vector2<f64>, f64)> {
    let g2 = principal_minor_2x2(g);
    let det2 = g2.determinant();
    let det = g.determinant();
    if !(det2 > 0.0 && det > 0.0) {
        return Err(Error::validation("metric is not positive definite"));
    }
    let a = g2
        .try_inverse()
        .ok_or_else(|| Error::numerical("singular in-plane metric"))?
        * Vector2::new(g[(0, 2)], g[(1, 2)]);
    Ok((a, (det / det2).sqrt()))
}

/// Grid samples of a deformation `y: Ω → ℝ³`.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion {
    pub grid: Grid2,
    pub y: Vec<Vector3<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    Flat,
    Cylinder,
    Paraboloid,
}

impl Immersion {
    pub fn from_fn(grid: Grid2, f: impl Fn(Point2) -> Vector3<f64>) -> Self {
        Immersion { grid, y: grid.points().into_iter().map(f).collect() }
    }

    /// `y = (x', 0)`.
    pub fn flat(grid: Grid2) -> Self {
        Self::from_fn(grid, |p| Vector3::new(p.x1, p.x2, 0.0))
    }

    /// `y = (x1, sin x2, cos x2)`.
    pub fn cylinder(grid: Grid2) -> Self {
        Self::from_fn(grid, |p| Vector3::new(p.x1, p.x2.sin(), p.x2.cos()))
    }

    /// `y = (x1, x2, |x'|²/2)`.
    pub fn paraboloid(grid: Grid2) -> Self {
        Self::from_fn(grid, |p| Vector3::new(p.x1, p.x2, 0.5 * (p.x1 * p.x1 + p.x2 * p.x2)))
    }

    pub fn seeded(grid: Grid2, seed: Seed) -> Self {
        match seed {
            Seed::Flat => Self::flat(grid),
            Seed::Cylinder => Self::cylinder(grid),
            Seed::Paraboloid => Self::paraboloid(grid),
        }
    }

    /// Adds independent uniform noise in `[-amp, amp]` to every coordinate.
    pub fn with_noise(mut self, amp: f64, seed: u64) -> Self {
        if amp > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in self.y.iter_mut() {
                for c in v.iter_mut() {
                    *c += rng.random_range(-amp..=amp);
                }
            }
        }
        self
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.y.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn from_vec(grid: Grid2, x: &[f64]) -> Self {
        Immersion { grid, y: x.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect() }
    }

    pub fn tangents(&self) -> [Vec<Vector3<f64>>; 2] {
        [stencil::diff(&self.grid, &self.y, 0), stencil::diff(&self.grid, &self.y, 1)]
    }

    /// Unit normals, `None` on degenerate nodes.
    pub fn normals(&self) -> Vec<Option<Vector3<f64>>> {
        let [d1, d2] = self.tangents();
        d1.iter()
            .zip(&d2)
            .map(|(a, b)| {
                let n = a.cross(b);
                let l = n.norm();
                (l >= DEGENERATE_TOL).then(|| n / l)
            })
            .collect()
    }

    /// `Π = (∇y)ᵀ∇N` on every node (degenerate normals count as zero).
    pub fn second_form(&self) -> Vec<Matrix2<f64>> {
        let [d1, d2] = self.tangents();
        let n: Vec<Vector3<f64>> = self.normals().into_iter().map(|v| v.unwrap_or_else(Vector3::zeros)).collect();
        let dn = [stencil::diff(&self.grid, &n, 0), stencil::diff(&self.grid, &n, 1)];
        (0..self.grid.len())
            .map(|k| {
                let dy = [d1[k], d2[k]];
                Matrix2::from_fn(|i, j| dy[i].dot(&dn[j][k]))
            })
            .collect()
    }

    /// Cosserat vectors on every node; `None` on degenerate nodes.
    pub fn cosserat(&self, metric: &MetricField) -> Result<Vec<Option<Vector3<f64>>>> {
        let [d1, d2] = self.tangents();
        (0..self.grid.len())
            .map(|k| {
                let g = metric.g(self.grid.point(k));
                match cosserat_vector(&g, &d1[k], &d2[k]) {
                    Ok(b) => Ok(Some(b)),
                    Err(Error::Numerical(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    }

    /// `(∇y)ᵀ∇y − G₂ₓ₂` on every node.
    pub fn isometry_defect(&self, metric: &MetricField) -> Vec<Matrix2<f64>> {
        let [d1, d2] = self.tangents();
        (0..self.grid.len())
            .map(|k| {
                let dy = [d1[k], d2[k]];
                let g2 = principal_minor_2x2(&metric.g(self.grid.point(k)));
                Matrix2::from_fn(|i, j| dy[i].dot(&dy[j])) - g2
            })
            .collect()
    }

    /// `L²` norm of the isometry defect.
    pub fn isometry_residual(&self, metric: &MetricField) -> f64 {
        let defect = self.isometry_defect(metric);
        defect
            .iter()
            .enumerate()
            .map(|(k, p)| self.grid.trapezoid_weight(k) * p.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn rigid_motion(&self, r: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        Immersion { grid: self.grid, y: self.y.iter().map(|v| r * v + t).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendingResult {
    pub energy: f64,
    pub isometry_residual: f64,
    pub degenerate_nodes: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct NodeData {
    g2: Matrix2<f64>,
    a: Vector2<f64>,
    s: f64,
    k: Matrix3<f64>,
    w: f64,
}

/// Metric and quadratic-form data on a grid, reused across evaluations.
#[derive(Clone, Debug)]
pub struct BendingProblem {
    pub grid: Grid2,
    nodes: Vec<NodeData>,
}

struct Forward {
    d: [Vec<Vector3<f64>>; 2],
    cross: Vec<Vector3<f64>>,
    b: Vec<Vector3<f64>>,
    db: [Vec<Vector3<f64>>; 2],
    degenerate: Vec<bool>,
}

impl BendingProblem {
    pub fn new(metric: &MetricField, qf: &QuadraticForm3, grid: &Grid2) -> Result<Self> {
        let nodes = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let g = metric.g(grid.point(k));
                let ctx = EffectiveDensityContext::new(&g, qf)?;
                let (a, s) = frame_coefficients(&g)?;
                Ok(NodeData { g2: principal_minor_2x2(&g), a, s, k: ctx.q2_matrix(), w: grid.trapezoid_weight(k) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BendingProblem { grid: *grid, nodes })
    }

    fn forward(&self, y: &[Vector3<f64>]) -> Forward {
        let grid = &self.grid;
        let d = [stencil::diff(grid, y, 0), stencil::diff(grid, y, 1)];
        let cross: Vec<Vector3<f64>> = d[0].iter().zip(&d[1]).map(|(a, b)| a.cross(b)).collect();
        let mut degenerate = vec![false; grid.len()];
        let b: Vec<Vector3<f64>> = (0..grid.len())
            .map(|k| {
                let nd = &self.nodes[k];
                let len = cross[k].norm();
                if len < DEGENERATE_TOL {
                    degenerate[k] = true;
                    return Vector3::zeros();
                }
                d[0][k] * nd.a[0] + d[1][k] * nd.a[1] + cross[k] * (nd.s / len)
            })
            .collect();
        let db = [stencil::diff(grid, &b, 0), stencil::diff(grid, &b, 1)];
        Forward { d, cross, b, db, degenerate }
    }

    fn strain(f: &Forward, k: usize) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| f.d[i][k].dot(&f.db[j][k]))
    }

    /// Per-node `Q2((∇y)ᵀ∇b)` together with the degenerate mask.
    pub fn density(&self, imm: &Immersion) -> Result<(Vec<f64>, Vec<bool>)> {
        self.check(imm)?;
        let f = self.forward(&imm.y);
        let q = (0..self.grid.len())
            .map(|k| {
                if f.degenerate[k] {
                    return 0.0;
                }
                let v = q2_coords(&Self::strain(&f, k));
                v.dot(&(self.nodes[k].k * v))
            })
            .collect();
        Ok((q, f.degenerate))
    }

    fn check(&self, imm: &Immersion) -> Result<()> {
        if imm.grid != self.grid || imm.y.len() != self.grid.len() {
            return Err(Error::validation("immersion grid does not match the problem grid"));
        }
        if imm.y.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::validation("immersion has non-finite coordinates"));
        }
        Ok(())
    }

    /// Discrete `I_G(y) = (1/24) ∫ Q2((∇y)ᵀ∇b)` by the trapezoid rule.
    pub fn energy(&self, imm: &Immersion) -> Result<BendingResult> {
        let (q, deg) = self.density(imm)?;
        let energy: f64 = q.iter().zip(&self.nodes).map(|(q, n)| n.w * q).sum::<f64>() / 24.0;
        let defect: f64 = self.isometry_terms(&imm.y).iter().sum();
        Ok(BendingResult {
            energy,
            isometry_residual: defect.sqrt(),
            degenerate_nodes: deg.iter().filter(|&&d| d).count(),
            iterations: 0,
            converged: true,
        })
    }

    fn isometry_terms(&self, y: &[Vector3<f64>]) -> Vec<f64> {
        let d = [stencil::diff(&self.grid, y, 0), stencil::diff(&self.grid, y, 1)];
        (0..self.grid.len())
            .map(|k| {
                let p = Matrix2::from_fn(|i, j| d[i][k].dot(&d[j][k])) - self.nodes[k].g2;
                self.nodes[k].w * p.norm_squared()
            })
            .collect()
    }

    /// `J_ε(y) = I_G(y) + (1/ε) ‖(∇y)ᵀ∇y − G₂ₓ₂‖²` and its gradient with
    /// respect to the flattened node coordinates.
    pub fn objective(&self, x: &[f64], eps: f64) -> (f64, Vec<f64>) {
        let grid = &self.grid;
        let n = grid.len();
        let y: Vec<Vector3<f64>> = x.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
        let f = self.forward(&y);
        let pen = 1.0 / eps;

        // Per-node value and local adjoints.
        let local: Vec<(f64, [Vector3<f64>; 2], [Vector3<f64>; 2])> = (0..n)
            .into_par_iter()
            .map(|k| {
                let nd = &self.nodes[k];
                let dy = [f.d[0][k], f.d[1][k]];
                let mut gdy = [Vector3::zeros(); 2];
                let mut gdb = [Vector3::zeros(); 2];
                let p = Matrix2::from_fn(|i, j| dy[i].dot(&dy[j])) - nd.g2;
                let mut val = pen * nd.w * p.norm_squared();
                for a in 0..2 {
                    gdy[a] += (dy[0] * p[(a, 0)] + dy[1] * p[(a, 1)]) * (4.0 * pen * nd.w);
                }
                if !f.degenerate[k] {
                    let strain = Self::strain(&f, k);
                    let v = q2_coords(&strain);
                    let kv = nd.k * v;
                    val += nd.w / 24.0 * v.dot(&kv);
                    let gv = kv * (nd.w / 12.0);
                    let r = std::f64::consts::FRAC_1_SQRT_2;
                    let gf = Matrix2::new(gv[0], gv[2] * r, gv[2] * r, gv[1]);
                    for i in 0..2 {
                        for j in 0..2 {
                            gdy[i] += f.db[j][k] * gf[(i, j)];
                            gdb[j] += dy[i] * gf[(i, j)];
                        }
                    }
                }
                (val, gdy, gdb)
            })
            .collect();

        let value: f64 = local.iter().map(|l| l.0).sum();
        let mut gb = vec![Vector3::zeros(); n];
        for axis in 0..2 {
            let g: Vec<Vector3<f64>> = local.iter().map(|l| l.2[axis]).collect();
            stencil::diff_transpose_add(grid, &g, axis, &mut gb);
        }
        let mut gd: [Vec<Vector3<f64>>; 2] = [local.iter().map(|l| l.1[0]).collect(), local.iter().map(|l| l.1[1]).collect()];
        for k in 0..n {
            if f.degenerate[k] {
                continue;
            }
            let nd = &self.nodes[k];
            let gbk = gb[k];
            gd[0][k] += gbk * nd.a[0];
            gd[1][k] += gbk * nd.a[1];
            // b ⊃ s N with N = c/|c|, c = ∂1y × ∂2y
            let c = f.cross[k];
            let len = c.norm();
            let nn = c / len;
            let gn = gbk * nd.s;
            let gc = (gn - nn * nn.dot(&gn)) / len;
            gd[0][k] += f.d[1][k].cross(&gc);
            gd[1][k] += gc.cross(&f.d[0][k]);
        }
        let mut gy = vec![Vector3::zeros(); n];
        for (axis, g) in gd.iter().enumerate() {
            stencil::diff_transpose_add(grid, g, axis, &mut gy);
        }
        let _ = &f.b;
        (value, gy.iter().flat_map(|v| [v.x, v.y, v.z]).collect())
    }
}

/// Weights of `∂_a ∂_b` at node `k` as composed first-difference stencils.
fn composite_weights(grid: &Grid2, k: usize, a: usize, b: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(9);
    for (m, wa) in stencil::node_weights(grid, k, a) {
        if wa == 0.0 {
            continue;
        }
        for (l, wb) in stencil::node_weights(grid, m, b) {
            if wb == 0.0 {
                continue;
            }
            match out.iter_mut().find(|e| e.0 == l) {
                Some(e) => e.1 += wa * wb,
                None => out.push((l, wa * wb)),
            }
        }
    }
    out
}

/// Per-component band preconditioners: a biharmonic model of the bending
/// Hessian plus the Gauss–Newton Hessian of the isometry penalty at `y`.
pub(crate) fn preconditioner(problem: &BendingProblem, y: &[Vector3<f64>], eps: f64) -> Result<[BandedSpd; 3]> {
    let grid = &problem.grid;
    let nx = grid.nx;
    let bw = 4 * nx + 4;
    let n = grid.len();
    let d = [stencil::diff(grid, y, 0), stencil::diff(grid, y, 1)];
    let mut mats = [BandedSpd::zeros(n, bw), BandedSpd::zeros(n, bw), BandedSpd::zeros(n, bw)];
    let mut bih = BandedSpd::zeros(n, bw);
    for k in 0..n {
        let nd = &problem.nodes[k];
        let beta = nd.w * nd.s * nd.s * nd.k.trace() / 36.0;
        let s11 = composite_weights(grid, k, 0, 0);
        let s22 = composite_weights(grid, k, 1, 1);
        let s12 = composite_weights(grid, k, 0, 1);
        bih.add_outer(&s11, beta);
        bih.add_outer(&s22, beta);
        bih.add_outer(&s12, 2.0 * beta);

        let st = [stencil::node_weights(grid, k, 0), stencil::node_weights(grid, k, 1)];
        let pen = 2.0 * nd.w / eps;
        for (c, m) in mats.iter_mut().enumerate() {
            let row = |a: usize, b: usize| -> Vec<(usize, f64)> {
                let mut r: Vec<(usize, f64)> = Vec::with_capacity(6);
                for (idx, w) in st[b] {
                    r.push((idx, d[a][k][c] * w));
                }
                for (idx, w) in st[a] {
                    r.push((idx, d[b][k][c] * w));
                }
                r
            };
            m.add_outer(&row(0, 0), pen);
            m.add_outer(&row(1, 1), pen);
            m.add_outer(&row(0, 1), 2.0 * pen);
        }
    }
    let bscale = bih.max_diagonal();
    for m in mats.iter_mut() {
        for i in 0..n {
            for jj in i.saturating_sub(bw)..=i {
                let v = bih.get(i, jj);
                if v != 0.0 {
                    m.add(i, jj, v);
                }
            }
        }
        let shift = 1e-6 * m.max_diagonal().max(bscale).max(f64::MIN_POSITIVE);
        for k in 0..n {
            m.add(k, k, shift * problem.nodes[k].w / grid.dx() / grid.dy());
        }
        m.factor()?;
    }
    Ok(mats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeOptions {
    /// Strictly decreasing penalty parameters, applied in order with warm starts.
    pub schedule: Vec<f64>,
    /// Iteration budget shared by all stages.
    pub max_iter: usize,
    pub gtol: f64,
    pub memory: usize,
    /// Iterations between preconditioner rebuilds.
    pub refresh: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5], max_iter: 500, gtol: 1e-9, memory: 12, refresh: 100 }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() || self.schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::validation("penalty schedule must be a non-empty list of positive numbers"));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::validation("penalty schedule must be strictly decreasing"));
        }
        if !(self.gtol.is_finite() && self.gtol >= 0.0) || self.memory == 0 || self.refresh == 0 {
            return Err(Error::validation("gtol must be non-negative, memory and refresh positive"));
        }
        Ok(())
    }
}

/// Per-stage record of a penalty continuation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct MinimizeReport {
    pub immersion: Immersion,
    pub result: BendingResult,
    pub stages: Vec<StageReport>,
}

/// Penalized minimization of the bending energy with a decreasing penalty parameter.
pub fn minimize_bending(problem: &BendingProblem, y_init: &Immersion, opts: &MinimizeOptions) -> Result<MinimizeReport> {
    opts.validate()?;
    problem.check(y_init)?;
    let mut x = y_init.to_vec();
    let mut used = 0;
    let mut stages = Vec::new();
    let mut converged = false;
    for (si, &eps) in opts.schedule.iter().enumerate() {
        let budget = opts.max_iter.saturating_sub(used);
        if budget == 0 {
            break;
        }
        let mut stage = StageReport { eps, iterations: 0, objective: f64::NAN, grad_norm: f64::NAN, monotone: true };
        let mut last_f = f64::INFINITY;
        let mut termination = Termination::MaxIterations;
        while stage.iterations < budget {
            let lopts = LbfgsOptions {
                memory: opts.memory,
                max_iter: opts.refresh.min(budget - stage.iterations),
                gtol: opts.gtol,
                ..Default::default()
            };
            let y: Vec<Vector3<f64>> = x.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
            let pc = preconditioner(problem, &y, eps)?;
            let apply = |g: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; g.len()];
                for (c, m) in pc.iter().enumerate() {
                    let gc: Vec<f64> = g.iter().skip(c).step_by(3).copied().collect();
                    for (k, v) in m.solve(&gc).into_iter().enumerate() {
                        out[3 * k + c] = v;
                    }
                }
                out
            };
            let rep = lbfgs::minimize_preconditioned(|v| problem.objective(v, eps), x, &lopts, Some(&apply));
            if !rep.f.is_finite() {
                return Err(Error::numerical(format!("objective became non-finite at penalty {eps}")));
            }
            stage.iterations += rep.iterations;
            stage.objective = rep.f;
            stage.grad_norm = rep.grad_norm;
            stage.monotone &= rep.history.windows(2).all(|w| w[1] <= w[0]) && rep.f <= last_f;
            last_f = rep.f;
            x = rep.x;
            termination = rep.termination;
            if termination != Termination::MaxIterations || rep.iterations == 0 {
                break;
            }
        }
        used += stage.iterations;
        stages.push(stage);
        let last = si + 1 == opts.schedule.len();
        converged = last && matches!(termination, Termination::Gradient | Termination::Objective);
    }
    let immersion = Immersion::from_vec(problem.grid, &x);
    let mut result = problem.energy(&immersion)?;
    result.iterations = used;
    result.converged = converged;
    Ok(MinimizeReport { immersion, result, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::metric::Rect;

    #[test]
    fn cosserat_reduces_to_normal_for_block_metric() {
        let mut g = Matrix3::identity();
        g[(0, 0)] = 2.0;
        let b = cosserat_vector(&g, &Vector3::new(1.4, 0.0, 0.1), &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        let n = Vector3::new(1.4, 0.0, 0.1).cross(&Vector3::y()).normalize();
        assert!((b - n).norm() < 1e-15);
    }

    #[test]
    fn cosserat_of_ex61_flat() {
        let g = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 4.0));
        let b = cosserat_vector(&g, &Vector3::x(), &Vector3::y()).unwrap();
        assert!((b - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn frame_completes_metric() {
        let m = catalog::ex64(catalog::default_domain("ex64")).unwrap();
        let p = Point2::new(1.7, 0.4);
        let d1 = Vector3::new(1.0, 0.0, p.x1);
        let d2 = Vector3::new(0.0, 1.0, p.x2);
        let b = cosserat_vector(&m.g(p), &d1, &d2).unwrap();
        let q = Matrix3::from_columns(&[d1, d2, b]);
        assert!((q.transpose() * q - m.g(p)).norm() < 1e-12);
        assert!(q.determinant() > 0.0);
    }

    #[test]
    fn zero_energy_for_flat_ex61() {
        let grid = Grid2::square(Rect::UNIT, 17).unwrap();
        let m = catalog::ex61(catalog::ex61_default_lambda(), Rect::UNIT).unwrap();
        let p = BendingProblem::new(&m, &QuadraticForm3::isotropic(1.0, 1.0).unwrap(), &grid).unwrap();
        let r = p.energy(&Immersion::flat(grid)).unwrap();
        assert!(r.energy < 1e-20 && r.isometry_residual < 1e-14, "{r:?}");
    }

    #[test]
    fn ex63ii_flat_energy_near_one_over_36() {
        let grid = Grid2::square(Rect::UNIT, 33).unwrap();
        let m = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        let p = BendingProblem::new(&m, &QuadraticForm3::isotropic(1.0, 1.0).unwrap(), &grid).unwrap();
        let r = p.energy(&Immersion::flat(grid)).unwrap();
        assert!((r.energy - 1.0 / 36.0).abs() < 1e-3, "{}", r.energy);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid2::square(Rect::UNIT, 5).unwrap();
        let m = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        let p = BendingProblem::new(&m, &QuadraticForm3::isotropic(1.0, 0.5).unwrap(), &grid).unwrap();
        let x = Immersion::paraboloid(grid).with_noise(0.05, 3).to_vec();
        let (_, g) = p.objective(&x, 0.1);
        let h = 1e-6;
        let mut fd = vec![0.0; x.len()];
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (p.objective(&xp, 0.1).0 - p.objective(&xm, 0.1).0) / (2.0 * h);
        }
        let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * scale, "relative error {}", err / scale);
    }
}
