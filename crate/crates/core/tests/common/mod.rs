//! Independent oracles for integration tests. They use only metric values and
//! plain nalgebra, never the crate's derivative or curvature machinery.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

pub type MetricFn<'a> = &'a dyn Fn(f64, f64) -> Matrix3<f64>;

fn dg(g: MetricFn, x: [f64; 2], axis: usize, h: f64) -> Matrix3<f64> {
    if axis == 2 {
        return Matrix3::zeros();
    }
    let mut p = x;
    let mut m = x;
    p[axis] += h;
    m[axis] -= h;
    (g(p[0], p[1]) - g(m[0], m[1])) / (2.0 * h)
}

/// `Γ^i_jk` by central differences of `G`.
pub fn christoffel_fd(g: MetricFn, x: [f64; 2], h: f64) -> [[[f64; 3]; 3]; 3] {
    let gi = g(x[0], x[1]).try_inverse().expect("invertible metric");
    let d = [dg(g, x, 0, h), dg(g, x, 1, h), Matrix3::zeros()];
    let mut out = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j][k] = 0.5
                    * (0..3)
                        .map(|l| gi[(i, l)] * (d[j][(l, k)] + d[k][(l, j)] - d[l][(j, k)]))
                        .sum::<f64>();
            }
        }
    }
    out
}

/// Scalar curvature from nested central differences.
pub fn scalar_curvature_fd(g: MetricFn, x: [f64; 2]) -> f64 {
    let (h, outer) = (1e-5, 1e-3);
    let gam = christoffel_fd(g, x, h);
    let dgam = |axis: usize| {
        let mut out = [[[0.0; 3]; 3]; 3];
        if axis == 2 {
            return out;
        }
        let (mut p, mut m) = (x, x);
        p[axis] += outer;
        m[axis] -= outer;
        let (gp, gm) = (christoffel_fd(g, p, h), christoffel_fd(g, m, h));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j][k] = (gp[i][j][k] - gm[i][j][k]) / (2.0 * outer);
                }
            }
        }
        out
    };
    let d = [dgam(0), dgam(1), dgam(2)];
    // R^s_ijk = ∂_j Γ^s_ik − ∂_k Γ^s_ij + Γ^s_jm Γ^m_ik − Γ^s_km Γ^m_ij, Ric_ik = R^j_ijk
    let mut ric = Matrix3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += d[j][j][i][k] - d[k][j][i][j];
                for m in 0..3 {
                    s += gam[j][j][m] * gam[m][i][k] - gam[j][k][m] * gam[m][i][j];
                }
            }
            ric[(i, k)] = s;
        }
    }
    let gi = g(x[0], x[1]).try_inverse().expect("invertible metric");
    (gi.component_mul(&ric)).sum()
}

pub fn spd_sqrt(g: &Matrix3<f64>) -> Matrix3<f64> {
    let e = SymmetricEigen::new(*g);
    e.eigenvectors * Matrix3::from_diagonal(&e.eigenvalues.map(f64::sqrt)) * e.eigenvectors.transpose()
}

/// `Q2(F) = min_c Q3(A⁻¹(F* + sym(c⊗e3))A⁻¹)` with `Q3 = μ|sym X|² + λ(tr X)²`,
/// assembled from the bilinear form and solved exactly.
pub fn q2_oracle(g: &Matrix3<f64>, mu: f64, lambda: f64, f: &Matrix2<f64>) -> f64 {
    let ai = spd_sqrt(g).try_inverse().expect("invertible");
    let b = |x: &Matrix3<f64>, y: &Matrix3<f64>| {
        let sx = (x + x.transpose()) * 0.5;
        let sy = (y + y.transpose()) * 0.5;
        mu * sx.dot(&sy) + lambda * x.trace() * y.trace()
    };
    let mut fs = Matrix3::zeros();
    fs.fixed_view_mut::<2, 2>(0, 0).copy_from(&((f + f.transpose()) * 0.5));
    let x0 = ai * fs * ai;
    let e: Vec<Matrix3<f64>> = (0..3)
        .map(|i| {
            let c = Vector3::ith(i, 1.0) * Vector3::z().transpose();
            ai * ((c + c.transpose()) * 0.5) * ai
        })
        .collect();
    let hess = Matrix3::from_fn(|i, j| 2.0 * b(&e[i], &e[j]));
    let grad = Vector3::from_fn(|i, _| 2.0 * b(&x0, &e[i]));
    let c = hess.lu().solve(&-grad).expect("nonsingular relaxation");
    b(&x0, &x0) + 0.5 * grad.dot(&c)
}

/// `F11,22 − 2 F12,12 + F22,11` of `n⊗n` for `n = (cos θ, sin θ)`.
pub fn curl_t_curl_of_angle(theta: &dyn Fn(f64, f64) -> f64, x: [f64; 2], h: f64) -> f64 {
    let m = |a: f64, b: f64| {
        let t = theta(x[0] + a, x[1] + b);
        (t.cos() * t.cos(), t.cos() * t.sin(), t.sin() * t.sin())
    };
    let c = m(0.0, 0.0);
    let f11_22 = (m(0.0, h).0 - 2.0 * c.0 + m(0.0, -h).0) / (h * h);
    let f22_11 = (m(h, 0.0).2 - 2.0 * c.2 + m(-h, 0.0).2) / (h * h);
    let f12_12 = (m(h, h).1 - m(h, -h).1 - m(-h, h).1 + m(-h, -h).1) / (4.0 * h * h);
    f11_22 - 2.0 * f12_12 + f22_11
}
