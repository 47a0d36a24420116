//! Christoffel symbols, curvature tensors and curvature-based classification
//! of midplane metrics.
//!
//! Indices are 0-based: `0, 1` are the in-plane directions and `2` is the
//! thickness direction, along which every derivative vanishes.

use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{principal_minor_2x2, Grid2, LocalMetric, MetricField, Point2};
use crate::stencil;

pub type Tensor3 = [[[f64; 3]; 3]; 3];
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// `gamma[i][k][l] = Γ^i_kl`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel {
    pub gamma: Tensor3,
}

impl Christoffel {
    pub fn get(&self, i: usize, k: usize, l: usize) -> f64 {
        self.gamma[i][k][l]
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Christoffel symbols and their in-plane derivatives, `dgamma[a][i][k][l] = ∂_a Γ^i_kl`.
#[derive(Clone, Copy, Debug)]
pub struct ChristoffelJet {
    pub gamma: Tensor3,
    pub dgamma: [Tensor3; 2],
}

fn zeros3() -> Tensor3 {
    [[[0.0; 3]; 3]; 3]
}

fn zeros4() -> Tensor4 {
    [[[[0.0; 3]; 3]; 3]; 3]
}

/// `c[m][k][l] = ∂_l G_mk + ∂_k G_ml − ∂_m G_kl` for a given derivative provider.
fn connection_coeffs(d: impl Fn(usize) -> Matrix3<f64>) -> Tensor3 {
    let dg = [d(0), d(1), d(2)];
    let mut c = zeros3();
    for (m, cm) in c.iter_mut().enumerate() {
        for (k, ck) in cm.iter_mut().enumerate() {
            for (l, v) in ck.iter_mut().enumerate() {
                *v = dg[l][(m, k)] + dg[k][(m, l)] - dg[m][(k, l)];
            }
        }
    }
    c
}

fn raise(g_inv: &Matrix3<f64>, c: &Tensor3) -> Tensor3 {
    let mut out = zeros3();
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                out[i][k][l] = 0.5 * (0..3).map(|m| g_inv[(i, m)] * c[m][k][l]).sum::<f64>();
            }
        }
    }
    out
}

pub fn christoffel_local(lm: &LocalMetric) -> ChristoffelJet {
    let c = connection_coeffs(|a| lm.d(a));
    let gamma = raise(&lm.g_inv, &c);
    let mut dgamma = [zeros3(); 2];
    for (a, dga) in dgamma.iter_mut().enumerate() {
        // ∂_a G⁻¹ = −G⁻¹ (∂_a G) G⁻¹
        let dinv = -lm.g_inv * lm.dg[a] * lm.g_inv;
        let dc = connection_coeffs(|b| lm.dd(a, b));
        let t1 = raise(&dinv, &c);
        let t2 = raise(&lm.g_inv, &dc);
        for i in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    dga[i][k][l] = t1[i][k][l] + t2[i][k][l];
                }
            }
        }
    }
    ChristoffelJet { gamma, dgamma }
}

pub fn christoffel(m: &MetricField, p: Point2) -> Result<Christoffel> {
    let lm = m.local(p)?;
    Ok(Christoffel { gamma: christoffel_local(&lm).gamma })
}

/// Curvature data at a single point.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub p: Point2,
    pub christoffel: Christoffel,
    /// `r[s][i][j][k] = R^s_ijk`.
    pub r: Tensor4,
    /// `r_low[s][i][j][k] = R_sijk = Σ_m G_sm R^m_ijk`.
    pub r_low: Tensor4,
    pub ric: Matrix3<f64>,
    pub scalar: f64,
    /// `(R³₁₁₂, R³₂₂₁, R₁₂₁₂)`.
    pub triple: [f64; 3],
    /// `R³₁₂₁`, equal to `−R³₁₁₂`.
    pub r3_121: f64,
    pub kappa2d: f64,
    pub d1_norm: f64,
    pub d2_norm: f64,
}

impl CurvatureReport {
    pub fn riemann_max_abs(&self) -> f64 {
        self.r.iter().flatten().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn triple_max_abs(&self) -> f64 {
        self.triple.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn riemann_local(lm: &LocalMetric) -> CurvatureReport {
    let cj = christoffel_local(lm);
    let gam = &cj.gamma;
    let dgam = |a: usize| if a < 2 { cj.dgamma[a] } else { zeros3() };
    let dg = [dgam(0), dgam(1), dgam(2)];
    let mut r = zeros4();
    for s in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut v = dg[j][s][i][k] - dg[k][s][i][j];
                    for m in 0..3 {
                        v += gam[s][j][m] * gam[m][i][k] - gam[s][k][m] * gam[m][i][j];
                    }
                    r[s][i][j][k] = v;
                }
            }
        }
    }
    let mut r_low = zeros4();
    for s in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r_low[s][i][j][k] = (0..3).map(|m| lm.g[(s, m)] * r[m][i][j][k]).sum();
                }
            }
        }
    }
    let ric = Matrix3::from_fn(|i, j| (0..3).map(|l| r[l][i][l][j]).sum());
    let scalar = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| lm.g_inv[(i, j)] * ric[(i, j)])
        .sum();
    let triple = [r[2][0][0][1], r[2][1][1][0], r_low[0][1][0][1]];
    CurvatureReport {
        p: lm.p,
        christoffel: Christoffel { gamma: cj.gamma },
        r,
        r_low,
        ric,
        scalar,
        triple,
        r3_121: r[2][0][1][0],
        kappa2d: gaussian_curvature_local(lm),
        d1_norm: lm.first_derivative_norm(),
        d2_norm: lm.second_derivative_norm(),
    }
}

pub fn riemann(m: &MetricField, p: Point2) -> Result<CurvatureReport> {
    Ok(riemann_local(&m.local(p)?))
}

/// Gaussian curvature of the in-plane block, Brioschi formula.
pub fn gaussian_curvature_local(lm: &LocalMetric) -> f64 {
    let (e, f, g) = (lm.g[(0, 0)], lm.g[(0, 1)], lm.g[(1, 1)]);
    let d = |a: usize, i: usize, j: usize| lm.dg[a][(i, j)];
    let dd = |a: usize, b: usize, i: usize, j: usize| lm.ddg[a][b][(i, j)];
    let (e_u, e_v) = (d(0, 0, 0), d(1, 0, 0));
    let (f_u, f_v) = (d(0, 0, 1), d(1, 0, 1));
    let (g_u, g_v) = (d(0, 1, 1), d(1, 1, 1));
    let e_vv = dd(1, 1, 0, 0);
    let f_uv = dd(0, 1, 0, 1);
    let g_uu = dd(0, 0, 1, 1);
    let a = Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_v,
        f_v - 0.5 * g_u,
        e,
        f,
        0.5 * g_v,
        f,
        g,
    );
    let b = Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, e, f, 0.5 * g_u, f, g);
    let det2 = e * g - f * f;
    (a.determinant() - b.determinant()) / (det2 * det2)
}

pub fn gaussian_curvature_2d(m: &MetricField, p: Point2) -> Result<f64> {
    Ok(gaussian_curvature_local(&m.local(p)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Immersible,
    ZeroBendingNonimmersible,
    Bending,
}

/// Vanishing thresholds; `tau = rel · (1 + sup‖∂G‖² + sup‖∂²G‖)` unless overridden.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "Thresholds::default_rel")]
    pub rel: f64,
    #[serde(default)]
    pub tau: Option<f64>,
}

impl Thresholds {
    fn default_rel() -> f64 {
        1e-6
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { rel: 1e-6, tau: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub verdict: Regime,
    pub riemann_sup: f64,
    pub triple_sup: f64,
    pub kappa2d_sup: f64,
    pub scalar_sup: f64,
    pub tau: f64,
    pub thresholds: Thresholds,
}

/// Curvature reports on every node of a grid, in node order.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub grid: Grid2,
    pub nodes: Vec<CurvatureReport>,
}

impl CurvatureField {
    pub fn compute(m: &MetricField, grid: &Grid2) -> Result<Self> {
        let nodes = (0..grid.len())
            .into_par_iter()
            .map(|k| riemann(m, grid.point(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CurvatureField { grid: *grid, nodes })
    }

    fn sup(&self, f: impl Fn(&CurvatureReport) -> f64) -> f64 {
        self.nodes.iter().map(f).fold(0.0, f64::max)
    }

    pub fn riemann_sup(&self) -> f64 {
        self.sup(CurvatureReport::riemann_max_abs)
    }

    pub fn triple_sup(&self) -> f64 {
        self.sup(CurvatureReport::triple_max_abs)
    }

    pub fn kappa2d_sup(&self) -> f64 {
        self.sup(|r| r.kappa2d.abs())
    }

    pub fn scalar_sup(&self) -> f64 {
        self.sup(|r| r.scalar.abs())
    }

    pub fn tau(&self, th: &Thresholds) -> f64 {
        th.tau.unwrap_or_else(|| {
            let d1 = self.sup(|r| r.d1_norm);
            let d2 = self.sup(|r| r.d2_norm);
            th.rel * (1.0 + d1 * d1 + d2)
        })
    }

    pub fn classify(&self, th: &Thresholds) -> Verdict {
        let tau = self.tau(th);
        let riemann_sup = self.riemann_sup();
        let triple_sup = self.triple_sup();
        let verdict = if riemann_sup < tau {
            Regime::Immersible
        } else if triple_sup < tau {
            Regime::ZeroBendingNonimmersible
        } else {
            Regime::Bending
        };
        Verdict {
            verdict,
            riemann_sup,
            triple_sup,
            kappa2d_sup: self.kappa2d_sup(),
            scalar_sup: self.scalar_sup(),
            tau,
            thresholds: *th,
        }
    }
}

pub fn classify(m: &MetricField, grid: &Grid2, th: &Thresholds) -> Result<Verdict> {
    Ok(CurvatureField::compute(m, grid)?.classify(th))
}

/// `Π_ij = −Γ³_ij / √G³³`.
pub fn target_second_form_local(lm: &LocalMetric, gamma: &Tensor3) -> Matrix2<f64> {
    let s = lm.g_inv[(2, 2)].sqrt();
    Matrix2::from_fn(|i, j| -gamma[2][i][j] / s)
}

pub fn target_second_form(m: &MetricField, p: Point2) -> Result<Matrix2<f64>> {
    let lm = m.local(p)?;
    let g33 = lm.g_inv[(2, 2)];
    if g33 <= 0.0 {
        return Err(Error::numerical("G^33 is not positive"));
    }
    Ok(target_second_form_local(&lm, &christoffel_local(&lm).gamma))
}

/// In-plane symbols `γ^s_kl = Γ^s_kl − (G^{3s}/G^{33}) Γ³_kl`, `s, k, l` in 0..2.
pub fn surface_christoffel(lm: &LocalMetric, gamma: &Tensor3) -> [[[f64; 2]; 2]; 2] {
    let mut out = [[[0.0; 2]; 2]; 2];
    for (s, os) in out.iter_mut().enumerate() {
        let ratio = lm.g_inv[(2, s)] / lm.g_inv[(2, 2)];
        for (k, ok) in os.iter_mut().enumerate() {
            for (l, v) in ok.iter_mut().enumerate() {
                *v = gamma[s][k][l] - ratio * gamma[2][k][l];
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityResidual {
    pub codazzi1: f64,
    pub codazzi2: f64,
    pub gauss: f64,
}

/// Sup-norm residuals of the Codazzi–Mainardi and Gauss equations for a
/// candidate second fundamental form given on the nodes of `grid`.
pub fn codazzi_gauss_residual(
    m: &MetricField,
    pi: &[Matrix2<f64>],
    grid: &Grid2,
) -> Result<CompatibilityResidual> {
    if pi.len() != grid.len() {
        return Err(Error::validation("second fundamental form does not match the grid"));
    }
    let d1 = stencil::diff(grid, pi, 0);
    let d2 = stencil::diff(grid, pi, 1);
    let per_node = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let lm = m.local(grid.point(k))?;
            let cj = christoffel_local(&lm);
            let g = surface_christoffel(&lm, &cj.gamma);
            let p = &pi[k];
            let cm1 = d2[k][(0, 0)] - d1[k][(0, 1)]
                - (0..2).map(|s| p[(0, s)] * g[s][0][1] - p[(1, s)] * g[s][0][0]).sum::<f64>();
            let cm2 = d2[k][(0, 1)] - d1[k][(1, 1)]
                - (0..2).map(|s| p[(0, s)] * g[s][1][1] - p[(1, s)] * g[s][0][1]).sum::<f64>();
            let kappa = gaussian_curvature_local(&lm);
            let gauss = p.determinant() - kappa * principal_minor_2x2(&lm.g).determinant();
            Ok([cm1.abs(), cm2.abs(), gauss.abs()])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = [0.0f64; 3];
    for r in &per_node {
        for i in 0..3 {
            out[i] = out[i].max(r[i]);
        }
    }
    Ok(CompatibilityResidual { codazzi1: out[0], codazzi2: out[1], gauss: out[2] })
}

/// `max |∂_i G_jk − Σ_m (G_mk Γ^m_ij + G_mj Γ^m_ik)|` at a point.
pub fn metric_compatibility_residual(lm: &LocalMetric, gamma: &Tensor3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        let di = lm.d(i);
        for j in 0..3 {
            for k in 0..3 {
                let rhs: f64 = (0..3)
                    .map(|m| lm.g[(m, k)] * gamma[m][i][j] + lm.g[(m, j)] * gamma[m][i][k])
                    .sum();
                worst = worst.max((di[(j, k)] - rhs).abs());
            }
        }
    }
    worst
}

/// `max |∂_i G^jk + Σ_m (G^mk Γ^j_mi + G^mj Γ^k_mi)|` at a point.
pub fn inverse_compatibility_residual(lm: &LocalMetric, gamma: &Tensor3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        let dinv = -lm.g_inv * lm.d(i) * lm.g_inv;
        for j in 0..3 {
            for k in 0..3 {
                let rhs: f64 = (0..3)
                    .map(|m| lm.g_inv[(m, k)] * gamma[j][m][i] + lm.g_inv[(m, j)] * gamma[k][m][i])
                    .sum();
                worst = worst.max((dinv[(j, k)] + rhs).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::field::ScalarSpec;
    use crate::metric::Rect;

    #[test]
    fn euclidean_metric_is_flat() {
        let m = catalog::identity(Rect::UNIT);
        let r = riemann(&m, Point2::new(0.3, 0.4)).unwrap();
        assert_eq!(r.riemann_max_abs(), 0.0);
        assert_eq!(r.kappa2d, 0.0);
        let grid = Grid2::square(Rect::UNIT, 5).unwrap();
        let v = classify(&m, &grid, &Thresholds::default()).unwrap();
        assert_eq!(v.verdict, Regime::Immersible);
    }

    #[test]
    fn ex61_christoffel_symbols() {
        let m = catalog::ex61(catalog::ex61_default_lambda(), Rect::UNIT).unwrap();
        let (x1, x2) = (0.6, 0.2);
        let g = christoffel(&m, Point2::new(x1, x2)).unwrap();
        let lam = 1.0 + x1 * x1;
        let d1 = 2.0 * x1;
        assert!((g.get(0, 2, 2) + 0.5 * d1).abs() < 1e-14);
        assert!(g.get(1, 2, 2).abs() < 1e-14);
        assert!((g.get(2, 0, 2) - d1 / (2.0 * lam)).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g.get(2, i, j), 0.0);
            }
        }
    }

    #[test]
    fn ex63ii_symbols_and_curvature() {
        let m = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        let p = Point2::new(0.7, 0.4);
        let r = riemann(&m, p).unwrap();
        let g = &r.christoffel;
        assert!(g.get(2, 0, 0).abs() < 1e-14);
        assert!((g.get(2, 0, 1) - 0.7).abs() < 1e-14);
        assert!(g.get(2, 1, 1).abs() < 1e-14);
        assert!((r.triple[0] - 1.0).abs() < 1e-12);
        assert!((r.r3_121 + r.triple[0]).abs() < 1e-14);
        let pi = target_second_form(&m, p).unwrap();
        assert!((pi[(0, 1)] + 0.7).abs() < 1e-14);
    }

    #[test]
    fn ex63iii_scalar_curvature() {
        let m = catalog::ex63iii(Rect::UNIT).unwrap();
        for &x2 in &[0.0, 0.25, 0.5, 1.0] {
            let r = riemann(&m, Point2::new(0.3, x2)).unwrap();
            // symbolic computation gives S ≡ -2
            assert!((r.scalar + 2.0).abs() < 1e-12, "{}", r.scalar);
            assert!(r.triple_max_abs() < 1e-13);
        }
        let pi = target_second_form(&m, Point2::new(0.3, 0.5)).unwrap();
        assert!((pi - Matrix2::new(0.0, 0.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn ex64_values() {
        let m = catalog::ex64(catalog::default_domain("ex64")).unwrap();
        let r = riemann(&m, Point2::new(1.5, 0.5)).unwrap();
        assert!((r.scalar - 1.5).abs() < 1e-10, "{}", r.scalar);
        assert!((r.kappa2d - 3.5f64.powi(-2)).abs() < 1e-12);
        assert!(r.triple_max_abs() < 1e-10);
    }

    #[test]
    fn ex62_r1212_matches_conformal_formula() {
        let lam = ScalarSpec::quadratic(1.0, 0.3, 0.0, 0.5, 0.2, 0.4);
        let m = catalog::ex62(lam.clone(), Rect::UNIT).unwrap();
        let p = Point2::new(0.4, 0.6);
        let r = riemann(&m, p).unwrap();
        let j = lam.jet_at(p.x1, p.x2);
        let lap_log = j.laplacian() / j.v - (j.d[0] * j.d[0] + j.d[1] * j.d[1]) / (j.v * j.v);
        assert!((r.triple[2] + 0.5 * j.v * lap_log).abs() < 1e-12);
        assert!((r.triple[2] - j.v * j.v * r.kappa2d).abs() < 1e-12);
        assert!(r.triple[0].abs() < 1e-13 && r.triple[1].abs() < 1e-13);
    }

    #[test]
    fn classification_of_catalog_metrics() {
        let grid = Grid2::square(Rect::UNIT, 9).unwrap();
        let th = Thresholds::default();
        let ex61 = catalog::ex61(catalog::ex61_default_lambda(), Rect::UNIT).unwrap();
        assert_eq!(classify(&ex61, &grid, &th).unwrap().verdict, Regime::ZeroBendingNonimmersible);
        let ex63ii = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        assert_eq!(classify(&ex63ii, &grid, &th).unwrap().verdict, Regime::Bending);
        let ex63iii = catalog::ex63iii(Rect::UNIT).unwrap();
        assert_eq!(classify(&ex63iii, &grid, &th).unwrap().verdict, Regime::ZeroBendingNonimmersible);
    }

    #[test]
    fn compatibility_identities_hold() {
        for m in [
            catalog::ex64(catalog::default_domain("ex64")).unwrap(),
            catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap(),
        ] {
            let p = Point2::new(m.domain.x1[0] + 0.37, m.domain.x2[0] + 0.61);
            let lm = m.local(p).unwrap();
            let g = christoffel_local(&lm).gamma;
            assert!(metric_compatibility_residual(&lm, &g) < 1e-12);
            assert!(inverse_compatibility_residual(&lm, &g) < 1e-12);
        }
    }

    #[test]
    fn codazzi_gauss_on_cylinder_and_obstructed_metric() {
        let grid = Grid2::square(Rect::UNIT, 17).unwrap();
        let m = catalog::ex63iii(Rect::UNIT).unwrap();
        let pi: Vec<_> = grid.points().iter().map(|p| target_second_form(&m, *p).unwrap()).collect();
        let r = codazzi_gauss_residual(&m, &pi, &grid).unwrap();
        assert!(r.codazzi1 < 1e-12 && r.codazzi2 < 1e-12 && r.gauss < 1e-12, "{r:?}");

        let m = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        let pi: Vec<_> = grid.points().iter().map(|p| target_second_form(&m, *p).unwrap()).collect();
        let r = codazzi_gauss_residual(&m, &pi, &grid).unwrap();
        assert!(r.codazzi1 > 0.5, "{r:?}");
    }

    #[test]
    fn flat_metric_with_zero_form() {
        let grid = Grid2::square(Rect::UNIT, 9).unwrap();
        let m = catalog::identity(Rect::UNIT);
        let r = codazzi_gauss_residual(&m, &vec![Matrix2::zeros(); grid.len()], &grid).unwrap();
        assert_eq!((r.codazzi1, r.codazzi2, r.gauss), (0.0, 0.0, 0.0));
    }
}
