//! Director-field metrics of nematic glass sheets,
//! `G = r^{2δ}(Id + (r²−1) n̂⊗n̂)`.

use std::f64::consts::FRAC_PI_2;

use log::warn;
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bending::cosserat_vector;
use crate::diffgeo::{gaussian_curvature_local, riemann_local, Regime, Thresholds};
use crate::effective::{q2_isotropic_closed, IsotropicModuli};
use crate::error::{Error, Result};
use crate::field::ScalarSpec;
use crate::jet::Jet;
use crate::metric::{Grid2, JetMatrix, MetricField, Point2, Rect};

/// Threshold on `|n|²` below which the director counts as vertical.
pub const VERTICAL_TOL: f64 = 1e-10;

/// In-plane angle pattern of the director.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    Radial,
    Azimuthal,
    Spiral { psi: f64 },
    /// Arbitrary angle field `θ(x')`.
    Custom { theta: ScalarSpec },
}

impl PatternSpec {
    /// In-plane angle of the director.
    pub fn angle_jet(&self, x1: Jet, x2: Jet) -> Jet {
        match self {
            PatternSpec::Radial => x2.atan2(x1),
            PatternSpec::Azimuthal => x2.atan2(x1) + FRAC_PI_2,
            PatternSpec::Spiral { psi } => x2.atan2(x1) + *psi,
            PatternSpec::Custom { theta } => theta.eval_jet(x1, x2),
        }
    }

    /// True for disclination patterns and angle fields singular at the origin.
    pub fn singular_at_origin(&self) -> bool {
        match self {
            PatternSpec::Custom { theta } => theta.singular_at_origin(),
            _ => true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectorParams {
    #[serde(default = "default_pattern")]
    pattern: PatternSpec,
    #[serde(default)]
    tilt: Option<ScalarSpec>,
    #[serde(default)]
    r: Option<f64>,
    #[serde(default)]
    nu: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
}

fn default_pattern() -> PatternSpec {
    PatternSpec::Radial
}

/// Unit director field together with the material parameters `r` and `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DirectorParams")]
pub struct DirectorField {
    pub pattern: PatternSpec,
    /// Polar angle of `n̂` measured from `e3`; absent means a planar director.
    pub tilt: Option<ScalarSpec>,
    pub r: f64,
    pub delta: f64,
}

impl TryFrom<DirectorParams> for DirectorField {
    type Error = Error;

    fn try_from(p: DirectorParams) -> Result<Self> {
        let delta = match (p.nu, p.delta) {
            (Some(_), Some(_)) => return Err(Error::validation("give either nu or delta, not both")),
            (Some(nu), None) => delta_from_nu(nu)?,
            (None, Some(d)) => d,
            (None, None) => delta_from_nu(DirectorField::DEFAULT_NU)?,
        };
        let d = DirectorField {
            pattern: p.pattern,
            tilt: p.tilt,
            r: p.r.unwrap_or(DirectorField::DEFAULT_R),
            delta,
        };
        d.validate()?;
        Ok(d)
    }
}

/// `δ = −ν/(ν+1)`.
pub fn delta_from_nu(nu: f64) -> Result<f64> {
    if !nu.is_finite() || nu <= -1.0 {
        return Err(Error::validation(format!("nu must be finite and > -1, got {nu}")));
    }
    Ok(-nu / (nu + 1.0))
}

impl DirectorField {
    pub const DEFAULT_R: f64 = 1.2;
    pub const DEFAULT_NU: f64 = 1.0;

    pub fn planar(pattern: PatternSpec, r: f64, delta: f64) -> Result<Self> {
        let d = DirectorField { pattern, tilt: None, r, delta };
        d.validate()?;
        Ok(d)
    }

    pub fn with_tilt(mut self, tilt: ScalarSpec) -> Self {
        self.tilt = Some(tilt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0) || (self.r - 1.0).abs() < 1e-12 {
            return Err(Error::validation(format!("r must be positive and different from 1, got {}", self.r)));
        }
        if !self.delta.is_finite() {
            return Err(Error::validation("delta must be finite"));
        }
        if self.r < 1.0 {
            warn!("r = {} < 1: oblate director metric", self.r);
        }
        Ok(())
    }

    pub fn validate_domain(&self, domain: &Rect) -> Result<()> {
        let singular = self.pattern.singular_at_origin()
            || self.tilt.as_ref().is_some_and(ScalarSpec::singular_at_origin);
        if singular && domain.contains_origin() {
            return Err(Error::validation(
                "director pattern is singular at the origin, which lies in the domain",
            ));
        }
        Ok(())
    }

    pub fn is_planar(&self) -> bool {
        self.tilt.is_none()
    }

    /// `α = (r − 1)/r`.
    pub fn alpha(&self) -> f64 {
        (self.r - 1.0) / self.r
    }

    pub fn n_hat_jet(&self, x1: Jet, x2: Jet) -> [Jet; 3] {
        let th = self.pattern.angle_jet(x1, x2);
        match &self.tilt {
            None => [th.cos(), th.sin(), Jet::constant(0.0)],
            Some(phi) => {
                let phi = phi.eval_jet(x1, x2);
                let s = phi.sin();
                [s * th.cos(), s * th.sin(), phi.cos()]
            }
        }
    }

    pub fn n_hat(&self, p: Point2) -> Vector3<f64> {
        let n = self.n_hat_jet(Jet::constant(p.x1), Jet::constant(p.x2));
        Vector3::new(n[0].v, n[1].v, n[2].v)
    }

    pub fn metric_jet(&self, x1: Jet, x2: Jet) -> JetMatrix {
        let n = self.n_hat_jet(x1, x2);
        let s = self.r.powf(2.0 * self.delta);
        let k = self.r * self.r - 1.0;
        let mut g = [[Jet::constant(0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                g[i][j] = (n[i] * n[j] * k + id) * s;
            }
        }
        g
    }

    pub fn metric_value(&self, p: Point2) -> Matrix3<f64> {
        let n = self.n_hat(p);
        (Matrix3::identity() + n * n.transpose() * (self.r * self.r - 1.0)) * self.r.powf(2.0 * self.delta)
    }

    /// `√G = r^δ (Id + (r − 1) n̂⊗n̂)`.
    pub fn sqrt_metric(&self, p: Point2) -> Matrix3<f64> {
        let n = self.n_hat(p);
        (Matrix3::identity() + n * n.transpose() * (self.r - 1.0)) * self.r.powf(self.delta)
    }

    /// `γ = 1/(n3² + |n|² r²)`.
    pub fn gamma(&self, p: Point2) -> f64 {
        let n = self.n_hat(p);
        let t = n[0] * n[0] + n[1] * n[1];
        1.0 / (n[2] * n[2] + t * self.r * self.r)
    }

    /// `γ̃ = (1 − √γ)/|n|²`, `None` for a vertical director.
    pub fn gamma_tilde(&self, p: Point2) -> Option<f64> {
        let n = self.n_hat(p);
        let t = n[0] * n[0] + n[1] * n[1];
        (t >= VERTICAL_TOL).then(|| (1.0 - self.gamma(p).sqrt()) / t)
    }
}

/// `F11,22 − 2 F12,12 + F22,11` for a symmetric field given by jets `(F11, F12, F22)`.
pub fn curl_t_curl_jet(f: &[Jet; 3]) -> f64 {
    f[0].dd[1][1] - 2.0 * f[1].dd[0][1] + f[2].dd[0][0]
}

/// Finite-difference `curlᵀcurl` of a symmetric 2x2 field with step `h`.
pub fn curl_t_curl_fd(f: impl Fn(Point2) -> Matrix2<f64>, p: Point2, h: f64) -> f64 {
    let at = |a: f64, b: f64| f(Point2::new(p.x1 + a, p.x2 + b));
    let c = at(0.0, 0.0);
    let f11_22 = (at(0.0, h)[(0, 0)] - 2.0 * c[(0, 0)] + at(0.0, -h)[(0, 0)]) / (h * h);
    let f22_11 = (at(h, 0.0)[(1, 1)] - 2.0 * c[(1, 1)] + at(-h, 0.0)[(1, 1)]) / (h * h);
    let f12_12 = (at(h, h)[(0, 1)] - at(h, -h)[(0, 1)] - at(-h, h)[(0, 1)] + at(-h, -h)[(0, 1)]) / (4.0 * h * h);
    f11_22 - 2.0 * f12_12 + f22_11
}

/// `curlᵀcurl(n⊗n)` for the planar part `n` of the director.
pub fn director_curl_t_curl(df: &DirectorField, p: Point2) -> f64 {
    let (x1, x2) = Jet::coords(p.x1, p.x2);
    let n = df.n_hat_jet(x1, x2);
    curl_t_curl_jet(&[n[0] * n[0], n[0] * n[1], n[1] * n[1]])
}

/// Gaussian curvature of `Id₂ + (r²−1) n⊗n`, from the curvature of the full in-plane block.
pub fn unscaled_kappa(df: &DirectorField, m: &MetricField, p: Point2) -> Result<f64> {
    let lm = m.local(p)?;
    Ok(gaussian_curvature_local(&lm) * df.r.powf(2.0 * df.delta))
}

/// `κ(Id₂ + γ n⊗n) + ½ γ/(γ+1) curlᵀcurl(n⊗n)`, `γ = r² − 1`.
pub fn kappa_identity_residual(df: &DirectorField, m: &MetricField, p: Point2) -> Result<f64> {
    let g = df.r * df.r - 1.0;
    Ok(unscaled_kappa(df, m, p)? + 0.5 * g / (g + 1.0) * director_curl_t_curl(df, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NematicResiduals {
    pub riemann: f64,
    pub kappa: f64,
    pub curl: f64,
    pub triple: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NematicVerdict {
    pub verdict: Regime,
    pub residuals: NematicResiduals,
    pub tau: f64,
}

/// Per-node evidence for the flat-director immersibility test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NematicNode {
    pub p: Point2,
    pub curl: f64,
    pub kappa: f64,
    pub triple: [f64; 3],
    pub riemann: f64,
}

/// Evaluates the four equivalent flatness conditions for a planar director
/// and checks that they agree.
pub fn nematic_classify(
    df: &DirectorField,
    m: &MetricField,
    grid: &Grid2,
    th: &Thresholds,
) -> Result<(NematicVerdict, Vec<NematicNode>)> {
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            let n3 = df.n_hat(p)[2];
            if n3.abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "director has n3 = {n3:e} at ({}, {}); the flatness test needs a planar director",
                    p.x1, p.x2
                )));
            }
            let lm = m.local(p)?;
            let rep = riemann_local(&lm);
            Ok((
                NematicNode {
                    p,
                    curl: director_curl_t_curl(df, p),
                    kappa: rep.kappa2d,
                    triple: rep.triple,
                    riemann: rep.riemann_max_abs(),
                },
                rep.d1_norm,
                rep.d2_norm,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = |f: &dyn Fn(&NematicNode) -> f64| nodes.iter().map(|(n, _, _)| f(n)).fold(0.0, f64::max);
    let residuals = NematicResiduals {
        riemann: sup(&|n| n.riemann),
        kappa: sup(&|n| n.kappa.abs()),
        curl: sup(&|n| n.curl.abs()),
        triple: sup(&|n| n.triple.iter().fold(0.0, |a: f64, v| a.max(v.abs()))),
    };
    let tau = th.tau.unwrap_or_else(|| {
        let d1 = nodes.iter().map(|x| x.1).fold(0.0, f64::max);
        let d2 = nodes.iter().map(|x| x.2).fold(0.0, f64::max);
        th.rel * (1.0 + d1 * d1 + d2)
    });
    let below = [residuals.riemann, residuals.kappa, residuals.curl, residuals.triple].map(|v| v < tau);
    if below.iter().any(|&b| b != below[0]) {
        return Err(Error::Consistency(format!(
            "flatness conditions disagree at threshold {tau:e}: {residuals:?}"
        )));
    }
    let verdict = if below[0] { Regime::Immersible } else { Regime::Bending };
    Ok((NematicVerdict { verdict, residuals, tau }, nodes.into_iter().map(|x| x.0).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NematicQ2 {
    pub lc_q1: f64,
    pub lc_q2: f64,
    pub closed: f64,
}

/// Effective density of the director metric by its two director formulas,
/// cross-checked against the closed isotropic form on the full metric.
pub fn nematic_q2(df: &DirectorField, m: &IsotropicModuli, p: Point2, f: &Matrix2<f64>) -> Result<NematicQ2> {
    let nh = df.n_hat(p);
    let n = Vector2::new(nh[0], nh[1]);
    let n3 = nh[2];
    if n3 * n3 > 1.0 + 1e-12 {
        return Err(Error::validation("director is not a unit vector"));
    }
    let f = (f + f.transpose()) * 0.5;
    let scale = df.r.powf(-4.0 * df.delta);
    let gamma = df.gamma(p);
    let k = (df.r * df.r - 1.0) * gamma;
    let fn_ = f * n;
    let fnn = fn_.dot(&n);
    let lc_q1 = scale
        * (m.mu * (f.norm_squared() - 2.0 * k * fn_.norm_squared() + k * k * fnn * fnn)
            + m.reduced_lambda() * (f.trace() - k * fnn).powi(2));
    let lc_q2 = match df.gamma_tilde(p) {
        Some(gt) => {
            let s = Matrix2::identity() - n * n.transpose() * gt;
            scale * m.q2_flat(&(s * f * s))
        }
        None => scale * m.q2_flat(&f),
    };
    let closed = q2_isotropic_closed(&df.metric_value(p), m, &f)?.value();
    let hi = lc_q1.max(lc_q2).max(closed);
    let lo = lc_q1.min(lc_q2).min(closed);
    if hi - lo > 1e-9 * hi.abs().max(1e-300) && hi - lo > 1e-15 {
        return Err(Error::Consistency(format!(
            "director forms of Q2 disagree: lcQ1 = {lc_q1}, lcQ2 = {lc_q2}, closed = {closed}"
        )));
    }
    Ok(NematicQ2 { lc_q1, lc_q2, closed })
}

/// Cosserat vector from the director formula, checked against the generic frame completion.
pub fn nematic_cosserat(df: &DirectorField, p: Point2, dy: [Vector3<f64>; 2]) -> Result<Vector3<f64>> {
    let nh = df.n_hat(p);
    let cross = dy[0].cross(&dy[1]);
    let len = cross.norm();
    if len < 1e-12 {
        return Err(Error::numerical("degenerate tangent plane"));
    }
    let normal = cross / len;
    let gamma = df.gamma(p);
    let dn_y = dy[0] * nh[0] + dy[1] * nh[1];
    let b = dn_y * ((df.r * df.r - 1.0) * nh[2] * gamma) + normal * (df.r * gamma.sqrt() * df.r.powf(df.delta));
    let generic = cosserat_vector(&df.metric_value(p), &dy[0], &dy[1])?;
    if (b - generic).norm() > 1e-10 * (1.0 + b.norm()) {
        return Err(Error::Consistency(format!("director Cosserat vector {b:?} differs from frame completion {generic:?}")));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn planar(pattern: PatternSpec) -> DirectorField {
        DirectorField::planar(pattern, 1.2, -0.5).unwrap()
    }

    #[test]
    fn sqrt_metric_formula() {
        let df = planar(PatternSpec::Spiral { psi: 0.3 }).with_tilt(ScalarSpec::Constant(0.8));
        let p = Point2::new(0.9, 1.1);
        let a = df.sqrt_metric(p);
        assert!((a * a - df.metric_value(p)).norm() < 1e-14);
        let b = crate::metric::metric_sqrt(&df.metric_value(p)).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn determinant_identities() {
        let df = planar(PatternSpec::Radial).with_tilt(ScalarSpec::quadratic(0.5, 0.2, 0.1, 0.0, 0.0, 0.0));
        for p in [Point2::new(0.7, 0.6), Point2::new(1.4, 0.9)] {
            let g = df.metric_value(p);
            let n3 = df.n_hat(p)[2];
            let r = df.r;
            let d = df.delta;
            assert!((g.determinant() / r.powf(2.0 + 6.0 * d) - 1.0).abs() < 1e-12);
            let det2 = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
            let expect = r.powf(4.0 * d) * (r * r - (r * r - 1.0) * n3 * n3);
            assert!((det2 / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_tilde_square_root_identity() {
        let df = planar(PatternSpec::Custom { theta: ScalarSpec::Constant(0.4) }).with_tilt(ScalarSpec::Constant(1.1));
        let p = Point2::new(0.2, 0.3);
        let nh = df.n_hat(p);
        let n = Vector2::new(nh[0], nh[1]);
        let gt = df.gamma_tilde(p).unwrap();
        let s = Matrix2::identity() - n * n.transpose() * gt;
        let g = Matrix2::identity() + n * n.transpose() * (df.r * df.r - 1.0);
        assert!((s * s * g - Matrix2::identity()).norm() < 1e-12);
        let flat = planar(PatternSpec::Radial);
        assert!((flat.gamma_tilde(Point2::new(1.0, 0.5)).unwrap() - flat.alpha()).abs() < 1e-15);
    }

    #[test]
    fn disclinations_are_flat() {
        let dom = catalog::default_domain("nematic");
        let grid = Grid2::square(dom, 9).unwrap();
        for pat in [PatternSpec::Radial, PatternSpec::Azimuthal, PatternSpec::Spiral { psi: 0.7 }] {
            let df = planar(pat);
            let m = catalog::nematic(&df, dom).unwrap();
            let (v, _) = nematic_classify(&df, &m, &grid, &Thresholds::default()).unwrap();
            assert_eq!(v.verdict, Regime::Immersible, "{v:?}");
        }
    }

    #[test]
    fn twisted_director_is_curved_and_consistent() {
        let df = planar(PatternSpec::Custom { theta: ScalarSpec::Product(vec![
            ScalarSpec::quadratic(0.0, 1.0, 0.0, 0.0, 0.0, 0.0),
            ScalarSpec::quadratic(0.0, 0.0, 1.0, 0.0, 0.0, 0.0),
        ]) });
        let dom = Rect::UNIT;
        let m = catalog::nematic(&df, dom).unwrap();
        let grid = Grid2::square(dom, 9).unwrap();
        let (v, _) = nematic_classify(&df, &m, &grid, &Thresholds::default()).unwrap();
        assert_eq!(v.verdict, Regime::Bending);
        let p = Point2::new(0.4, 0.7);
        assert!(kappa_identity_residual(&df, &m, p).unwrap().abs() < 1e-12);
        let fd = curl_t_curl_fd(
            |q| {
                let n = df.n_hat(q);
                Matrix2::new(n[0] * n[0], n[0] * n[1], n[0] * n[1], n[1] * n[1])
            },
            p,
            1e-4,
        );
        assert!((fd - director_curl_t_curl(&df, p)).abs() < 1e-5);
    }

    #[test]
    fn tilted_director_rejected_by_flat_test() {
        let df = planar(PatternSpec::Radial).with_tilt(ScalarSpec::Constant(1.0));
        let dom = catalog::default_domain("nematic");
        let m = catalog::nematic(&df, dom).unwrap();
        let grid = Grid2::square(dom, 5).unwrap();
        assert!(matches!(
            nematic_classify(&df, &m, &grid, &Thresholds::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn q2_vertical_and_planar_limits() {
        let m = IsotropicModuli::default();
        let f = Matrix2::new(0.3, 0.2, 0.2, -0.7);
        let up = planar(PatternSpec::Radial).with_tilt(ScalarSpec::Constant(0.0));
        let p = Point2::new(1.0, 1.0);
        let q = nematic_q2(&up, &m, p, &f).unwrap();
        let expect = up.r.powf(-4.0 * up.delta) * m.q2_flat(&f);
        assert!((q.lc_q1 - expect).abs() < 1e-12 && (q.lc_q2 - expect).abs() < 1e-12);

        let flat = planar(PatternSpec::Spiral { psi: 0.2 });
        let q = nematic_q2(&flat, &m, p, &f).unwrap();
        let nh = flat.n_hat(p);
        let n = Vector2::new(nh[0], nh[1]);
        let s = Matrix2::identity() - n * n.transpose() * flat.alpha();
        let nowe = flat.r.powf(-4.0 * flat.delta) * m.q2_flat(&(s * f * s));
        assert!((q.lc_q2 - nowe).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DirectorField::planar(PatternSpec::Radial, 1.0, 0.0).is_err());
        assert!(DirectorField::planar(PatternSpec::Radial, -2.0, 0.0).is_err());
        let df = planar(PatternSpec::Radial);
        assert!(catalog::nematic(&df, Rect::UNIT).is_err());
        let parsed: std::result::Result<DirectorField, _> =
            serde_json::from_value(serde_json::json!({"r": 1.2, "nu": 1.0, "delta": -0.5}));
        assert!(parsed.is_err());
        let parsed: DirectorField = serde_json::from_value(serde_json::json!({"pattern": {"spiral": {"psi": 0.7}}})).unwrap();
        assert_eq!(parsed.delta, -0.5);
        assert_eq!(parsed.r, 1.2);
    }
}
