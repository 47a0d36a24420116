//! Elastic quadratic forms `Q3`, the linear map `L3`, and the effective
//! plate density `Q2` obtained by relaxing out-of-plane strain components.

use nalgebra::{Cholesky, Matrix2, Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{embed_star, metric_sqrt, principal_minor_2x2, sqrt_spd2};

/// Relative tolerance for agreement between equivalent closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// Lamé pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotropicModuli {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for IsotropicModuli {
    fn default() -> Self {
        IsotropicModuli { mu: 1.0, lambda: 1.0 }
    }
}

impl IsotropicModuli {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        let m = IsotropicModuli { mu, lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.lambda.is_finite()) || self.mu <= 0.0 || self.lambda < 0.0 {
            return Err(Error::validation(format!(
                "Lamé moduli need mu > 0 and lambda >= 0, got mu = {}, lambda = {}",
                self.mu, self.lambda
            )));
        }
        Ok(())
    }

    /// `λμ / (λ + μ)`.
    pub fn reduced_lambda(&self) -> f64 {
        self.lambda * self.mu / (self.lambda + self.mu)
    }

    /// `Q⁰₂(X) = μ|sym X|² + λμ/(λ+μ) (tr X)²`.
    pub fn q2_flat(&self, x: &Matrix2<f64>) -> f64 {
        let s = sym2(x);
        self.mu * s.norm_squared() + self.reduced_lambda() * s.trace().powi(2)
    }
}

pub fn sym3(f: &Matrix3<f64>) -> Matrix3<f64> {
    (f + f.transpose()) * 0.5
}

pub fn sym2(f: &Matrix2<f64>) -> Matrix2<f64> {
    (f + f.transpose()) * 0.5
}

/// Coordinates of `sym F` in the orthonormal basis
/// `E11, E22, E33, (E23+E32)/√2, (E13+E31)/√2, (E12+E21)/√2`.
pub fn sym_coords(f: &Matrix3<f64>) -> Vector6<f64> {
    let r2 = std::f64::consts::SQRT_2;
    Vector6::new(
        f[(0, 0)],
        f[(1, 1)],
        f[(2, 2)],
        (f[(1, 2)] + f[(2, 1)]) / r2,
        (f[(0, 2)] + f[(2, 0)]) / r2,
        (f[(0, 1)] + f[(1, 0)]) / r2,
    )
}

pub fn from_sym_coords(v: &Vector6<f64>) -> Matrix3<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Matrix3::new(
        v[0],
        v[5] * s,
        v[4] * s,
        v[5] * s,
        v[1],
        v[3] * s,
        v[4] * s,
        v[3] * s,
        v[2],
    )
}

/// Quadratic form `Q3(F) = ⟨L3(sym F) : sym F⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum QuadraticForm3 {
    Isotropic(IsotropicModuli),
    /// SPD matrix acting on [`sym_coords`].
    General(Matrix6<f64>),
}

impl QuadraticForm3 {
    pub fn isotropic(mu: f64, lambda: f64) -> Result<Self> {
        Ok(QuadraticForm3::Isotropic(IsotropicModuli::new(mu, lambda)?))
    }

    pub fn general(c: Matrix6<f64>) -> Result<Self> {
        if (c - c.transpose()).abs().max() > 1e-12 * (1.0 + c.abs().max()) {
            return Err(Error::validation("elasticity matrix is not symmetric"));
        }
        if Cholesky::new(c).is_none() {
            return Err(Error::validation("elasticity matrix is not positive definite"));
        }
        Ok(QuadraticForm3::General(c))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuadraticForm3::Isotropic(m) => m.validate(),
            QuadraticForm3::General(c) => Self::general(*c).map(|_| ()),
        }
    }

    pub fn moduli(&self) -> Option<IsotropicModuli> {
        match self {
            QuadraticForm3::Isotropic(m) => Some(*m),
            QuadraticForm3::General(_) => None,
        }
    }

    pub fn matrix6(&self) -> Matrix6<f64> {
        match self {
            QuadraticForm3::Isotropic(m) => {
                let mut c = Matrix6::identity() * m.mu;
                for i in 0..3 {
                    for j in 0..3 {
                        c[(i, j)] += m.lambda;
                    }
                }
                c
            }
            QuadraticForm3::General(c) => *c,
        }
    }

    /// `L3(F)`, symmetric and insensitive to the skew part of `F`.
    pub fn l3(&self, f: &Matrix3<f64>) -> Matrix3<f64> {
        match self {
            QuadraticForm3::Isotropic(m) => sym3(f) * m.mu + Matrix3::identity() * (m.lambda * f.trace()),
            QuadraticForm3::General(c) => from_sym_coords(&(c * sym_coords(f))),
        }
    }

    pub fn q3(&self, f: &Matrix3<f64>) -> f64 {
        match self {
            QuadraticForm3::Isotropic(m) => m.mu * sym3(f).norm_squared() + m.lambda * f.trace().powi(2),
            QuadraticForm3::General(c) => {
                let v = sym_coords(f);
                v.dot(&(c * v))
            }
        }
    }
}

/// Pointwise data for relaxing `Q3` at a metric value `G`.
#[derive(Clone, Debug)]
pub struct EffectiveDensityContext {
    pub g: Matrix3<f64>,
    pub a: Matrix3<f64>,
    pub a_inv: Matrix3<f64>,
    /// `d = A⁻¹ e3`.
    pub d: Vector3<f64>,
    pub m_a: Matrix3<f64>,
    pub m_a_cond: f64,
    m_a_chol: Cholesky<f64, nalgebra::U3>,
    qf: QuadraticForm3,
}

impl EffectiveDensityContext {
    pub fn new(g: &Matrix3<f64>, qf: &QuadraticForm3) -> Result<Self> {
        let a = metric_sqrt(g)?;
        let a_inv = a
            .try_inverse()
            .ok_or_else(|| Error::numerical("square root of the metric is singular"))?;
        let d = a_inv.column(2).into_owned();
        let mut m_a = Matrix3::zeros();
        for i in 0..3 {
            let e = Vector3::ith(i, 1.0);
            m_a.set_column(i, &(qf.l3(&(e * d.transpose())) * d));
        }
        let m_a = sym3(&m_a);
        let eig = m_a.symmetric_eigenvalues();
        let m_a_cond = eig.max().abs() / eig.min().abs();
        let m_a_chol = Cholesky::new(m_a).ok_or_else(|| {
            Error::numerical(format!("M_A is not positive definite (condition {m_a_cond:e})"))
        })?;
        Ok(EffectiveDensityContext { g: *g, a, a_inv, d, m_a, m_a_cond, m_a_chol, qf: qf.clone() })
    }

    pub fn form(&self) -> &QuadraticForm3 {
        &self.qf
    }

    /// `D = A⁻¹ F* A⁻¹`.
    pub fn big_d(&self, f: &Matrix2<f64>) -> Matrix3<f64> {
        self.a_inv * embed_star(&sym2(f)) * self.a_inv
    }

    /// `−M_A⁻¹ L3(D) d`, i.e. `A⁻¹ c0`.
    fn scaled_c0(&self, f: &Matrix2<f64>) -> Vector3<f64> {
        let rhs = self.qf.l3(&self.big_d(f)) * self.d;
        -self.m_a_chol.solve(&rhs)
    }

    /// Minimizer `c0` of `c ↦ Q3(A⁻¹(F* + sym(c⊗e3))A⁻¹)`.
    pub fn minimizer_c0(&self, f: &Matrix2<f64>) -> Vector3<f64> {
        self.a * self.scaled_c0(f)
    }

    /// `Q2(F) = Q3(D) − ⟨M_A⁻¹ L3(D) d, L3(D) d⟩`.
    pub fn q2_general(&self, f: &Matrix2<f64>) -> f64 {
        let dd = self.big_d(f);
        let ld = self.qf.l3(&dd) * self.d;
        let q = self.qf.q3(&dd) - self.m_a_chol.solve(&ld).dot(&ld);
        q.max(0.0)
    }

    /// `Q3(A⁻¹(F* + sym(c⊗e3))A⁻¹)`.
    pub fn relaxed_q3(&self, f: &Matrix2<f64>, c: &Vector3<f64>) -> f64 {
        let ce = c * Vector3::z().transpose();
        let x = embed_star(&sym2(f)) + sym3(&ce);
        self.qf.q3(&(self.a_inv * x * self.a_inv))
    }

    /// Direct minimization over `c`: the quadratic in `c` is polarized
    /// through `Q3` alone and its 3x3 stationarity system solved by LU.
    pub fn q2_by_minimization(&self, f: &Matrix2<f64>) -> Result<f64> {
        let (c, _) = self.minimize_directly(f)?;
        Ok(self.relaxed_q3(f, &c))
    }

    pub fn minimize_directly(&self, f: &Matrix2<f64>) -> Result<(Vector3<f64>, f64)> {
        let zero = Vector3::zeros();
        let q0 = self.relaxed_q3(f, &zero);
        let mut h = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for i in 0..3 {
            let ei = Vector3::ith(i, 1.0);
            // q(c) = q0 + gᵀc + ½ cᵀHc
            let qp = self.relaxed_q3(f, &ei);
            let qm = self.relaxed_q3(f, &-ei);
            g[i] = 0.5 * (qp - qm);
            h[(i, i)] = qp + qm - 2.0 * q0;
        }
        for i in 0..3 {
            for j in 0..i {
                let ei = Vector3::ith(i, 1.0);
                let ej = Vector3::ith(j, 1.0);
                let qpp = self.relaxed_q3(f, &(ei + ej));
                let qmm = self.relaxed_q3(f, &-(ei + ej));
                let hij = 0.5 * (qpp + qmm - 2.0 * q0) - 0.5 * (h[(i, i)] + h[(j, j)]);
                h[(i, j)] = hij;
                h[(j, i)] = hij;
            }
        }
        let c = h
            .lu()
            .solve(&-g)
            .ok_or_else(|| Error::numerical("relaxation system is singular"))?;
        let value = q0 + g.dot(&c) + 0.5 * c.dot(&(h * c));
        Ok((c, value))
    }

    /// Stationarity residual `‖∇_c Q3‖` at `c`.
    pub fn stationarity_residual(&self, f: &Matrix2<f64>, c: &Vector3<f64>) -> f64 {
        let x = self.big_d(f) + sym3(&((self.a_inv * c) * self.d.transpose()));
        (self.a_inv * self.qf.l3(&x) * self.d * 2.0).norm()
    }

    /// Symmetric 3x3 matrix `K` with `Q2(F) = vᵀKv`, `v = (F11, F22, √2 F12)`.
    pub fn q2_matrix(&self) -> Matrix3<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = [Matrix2::new(1.0, 0.0, 0.0, 0.0), Matrix2::new(0.0, 0.0, 0.0, 1.0), Matrix2::new(0.0, s, s, 0.0)];
        let mut k = Matrix3::zeros();
        for i in 0..3 {
            k[(i, i)] = self.q2_general(&basis[i]);
        }
        for i in 0..3 {
            for j in 0..i {
                let v = 0.5 * (self.q2_general(&(basis[i] + basis[j])) - k[(i, i)] - k[(j, j)]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Coordinates `(F11, F22, √2 sym(F)12)` matching [`EffectiveDensityContext::q2_matrix`].
pub fn q2_coords(f: &Matrix2<f64>) -> Vector3<f64> {
    Vector3::new(f[(0, 0)], f[(1, 1)], (f[(0, 1)] + f[(1, 0)]) * std::f64::consts::FRAC_1_SQRT_2)
}

/// The three isotropic closed forms of `Q2` evaluated side by side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicQ2 {
    /// Expression through `D = A⁻¹F*A⁻¹` and `d = A⁻¹e3`.
    pub via_d: f64,
    /// `Q⁰₂(√G₂ₓ₂⁻¹ F √G₂ₓ₂⁻¹)`.
    pub via_minor: f64,
    /// Expression through `C = G⁻¹F*`.
    pub via_c: f64,
}

impl IsotropicQ2 {
    pub fn value(&self) -> f64 {
        self.via_minor
    }

    pub fn spread(&self) -> f64 {
        let v = [self.via_d, self.via_minor, self.via_c];
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        hi - lo
    }
}

pub fn q2_iso_via_d(g: &Matrix3<f64>, m: &IsotropicModuli, f: &Matrix2<f64>) -> Result<f64> {
    let a = metric_sqrt(g)?;
    let a_inv = a.try_inverse().ok_or_else(|| Error::numerical("singular square root"))?;
    let dd = a_inv * embed_star(&sym2(f)) * a_inv;
    let d = a_inv.column(2).into_owned();
    let d2 = d.norm_squared();
    let ddd = dd * d;
    let ddd_d = ddd.dot(&d);
    Ok(m.mu * (dd.norm_squared() - 2.0 * ddd.norm_squared() / d2 + ddd_d.powi(2) / (d2 * d2))
        + m.reduced_lambda() * (dd.trace() - ddd_d / d2).powi(2))
}

pub fn q2_iso_via_minor(g: &Matrix3<f64>, m: &IsotropicModuli, f: &Matrix2<f64>) -> Result<f64> {
    let s = sqrt_spd2(&principal_minor_2x2(g))?;
    let s_inv = s.try_inverse().ok_or_else(|| Error::numerical("singular in-plane metric"))?;
    Ok(m.q2_flat(&(s_inv * sym2(f) * s_inv)))
}

pub fn q2_iso_via_c(g: &Matrix3<f64>, m: &IsotropicModuli, f: &Matrix2<f64>) -> Result<f64> {
    let g_inv = g.try_inverse().ok_or_else(|| Error::numerical("singular metric"))?;
    let c = g_inv * embed_star(&sym2(f));
    let p = g_inv.column(2).into_owned();
    let e3 = Vector3::z();
    let p33 = p[2];
    let c2 = c * c;
    let cp = (c * p).dot(&e3);
    Ok(m.mu * (c2.trace() - 2.0 * (c2 * p).dot(&e3) / p33 + cp.powi(2) / (p33 * p33))
        + m.reduced_lambda() * (c.trace() - cp / p33).powi(2))
}

/// Evaluates the three isotropic closed forms and checks that they agree.
pub fn q2_isotropic_closed(g: &Matrix3<f64>, m: &IsotropicModuli, f: &Matrix2<f64>) -> Result<IsotropicQ2> {
    let out = IsotropicQ2 {
        via_d: q2_iso_via_d(g, m, f)?,
        via_minor: q2_iso_via_minor(g, m, f)?,
        via_c: q2_iso_via_c(g, m, f)?,
    };
    // Terms of size μ|G⁻¹|²|F|² may cancel, so they bound the roundoff floor.
    let g_inv_norm = g.try_inverse().map_or(0.0, |gi| gi.norm());
    let floor = 1e-13 * (m.mu + m.lambda) * (g_inv_norm * f.norm()).powi(2);
    let scale = out.via_d.abs().max(out.via_minor.abs()).max(out.via_c.abs());
    if out.spread() > CLOSED_FORM_TOL * scale + floor {
        return Err(Error::Consistency(format!("isotropic closed forms disagree: {out:?}")));
    }
    Ok(out)
}
