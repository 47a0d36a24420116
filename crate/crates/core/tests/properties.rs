#![allow(clippy::needless_range_loop)]

mod common;

use nalgebra::{Matrix2, Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use prestrain::bending::{cosserat_vector, BendingProblem, Immersion};
use prestrain::catalog;
use prestrain::diffgeo::riemann;
use prestrain::effective::{EffectiveDensityContext, IsotropicModuli, QuadraticForm3};
use prestrain::field::ScalarSpec;
use prestrain::metric::{Grid2, Point2, Rect};
use prestrain::scaling::{fit_scaling, gauss_legendre, DensityKind, DensityW};

fn mat3() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-1.0..1.0f64).prop_map(|a| Matrix3::from_row_slice(&a))
}

fn spd3() -> impl Strategy<Value = Matrix3<f64>> {
    (mat3(), 0.1..1.0f64).prop_map(|(b, s)| b.transpose() * b + Matrix3::identity() * s)
}

fn sym2() -> impl Strategy<Value = Matrix2<f64>> {
    prop::array::uniform3(-2.0..2.0f64).prop_map(|[a, b, c]| Matrix2::new(a, b, b, c))
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform3(-3.0..3.0f64).prop_map(|v| Rotation3::from_scaled_axis(Vector3::from(v)).into_inner())
}

fn moduli() -> impl Strategy<Value = IsotropicModuli> {
    (0.1..5.0f64, 0.0..5.0f64).prop_map(|(mu, lambda)| IsotropicModuli { mu, lambda })
}

fn quad_coeffs() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-0.3..0.3f64).prop_map(|mut c| {
        c[0] += 1.5;
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q2_is_nonnegative_homogeneous_and_matches_oracle(g in spd3(), f in sym2(), m in moduli(), t in -3.0..3.0f64) {
        let ctx = EffectiveDensityContext::new(&g, &QuadraticForm3::Isotropic(m)).unwrap();
        let q = ctx.q2_general(&f);
        prop_assert!(q >= 0.0);
        let oracle = common::q2_oracle(&g, m.mu, m.lambda, &f);
        prop_assert!((q - oracle).abs() <= 1e-9 * (1.0 + oracle));
        prop_assert!((ctx.q2_general(&(f * t)) - t * t * q).abs() <= 1e-9 * (1.0 + t * t * q));
    }

    #[test]
    fn q2_ignores_skew_part(g in spd3(), f in sym2(), w in -2.0..2.0f64, m in moduli()) {
        let ctx = EffectiveDensityContext::new(&g, &QuadraticForm3::Isotropic(m)).unwrap();
        let skew = Matrix2::new(0.0, w, -w, 0.0);
        prop_assert!((ctx.q2_general(&(f + skew)) - ctx.q2_general(&f)).abs() <= 1e-10 * (1.0 + ctx.q2_general(&f)));
    }

    #[test]
    fn q3_ignores_skew_part(f in mat3(), m in moduli()) {
        let qf = QuadraticForm3::Isotropic(m);
        let skew = f - f.transpose();
        prop_assert!((qf.q3(&(f + skew)) - qf.q3(&f)).abs() <= 1e-12 * (1.0 + qf.q3(&f)));
    }

    #[test]
    fn general_form_matrix_reproduces_isotropic(f in mat3(), m in moduli()) {
        let iso = QuadraticForm3::Isotropic(m);
        let gen = QuadraticForm3::general(iso.matrix6()).unwrap();
        prop_assert!((iso.q3(&f) - gen.q3(&f)).abs() <= 1e-12 * (1.0 + iso.q3(&f)));
    }

    #[test]
    fn densities_are_frame_indifferent(f in mat3(), r in rotation(), m in moduli()) {
        let f = f + Matrix3::identity();
        for kind in [DensityKind::GreenQuadratic, DensityKind::DistSqSo3] {
            let w = DensityW::new(kind, m).unwrap();
            let a = w.eval(&f);
            prop_assert!(a >= -1e-14);
            prop_assert!((w.eval(&(r * f)) - a).abs() <= 1e-11 * (1.0 + a));
            prop_assert!(w.eval(&r).abs() <= 1e-11);
        }
    }

    #[test]
    fn cosserat_vector_completes_the_frame(g in spd3(), r in rotation()) {
        let q = r * common::spd_sqrt(&g);
        let b = cosserat_vector(&g, &q.column(0).into_owned(), &q.column(1).into_owned()).unwrap();
        prop_assert!((b - q.column(2)).norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn riemann_has_curvature_symmetries(l1 in quad_coeffs(), l2 in quad_coeffs(), x in 0.1..0.9f64, y in 0.1..0.9f64) {
        let m = catalog::ex63(
            ScalarSpec::Quadratic([0.0, l1[1], l1[2], l1[3], l1[4], l1[5]]),
            ScalarSpec::Quadratic([0.0, l2[1], l2[2], l2[3], l2[4], l2[5]]),
            ScalarSpec::Quadratic(l2),
            Rect::UNIT,
        );
        let Ok(m) = m else { return Ok(()) };
        let Ok(rep) = riemann(&m, Point2::new(x, y)) else { return Ok(()) };
        let r = &rep.r_low;
        let big = r.iter().flatten().flatten().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        for s in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        prop_assert!((r[s][i][j][k] + r[s][i][k][j]).abs() <= 1e-10 * big);
                        prop_assert!((r[s][i][j][k] + r[i][s][j][k]).abs() <= 1e-10 * big);
                        prop_assert!((r[s][i][j][k] - r[j][k][s][i]).abs() <= 1e-10 * big);
                    }
                }
            }
        }
        let gfun = |a: f64, b: f64| m.g(Point2::new(a, b));
        let s = common::scalar_curvature_fd(&gfun, [x, y]);
        prop_assert!((rep.scalar - s).abs() <= 1e-4 * (1.0 + s.abs()), "{} vs {}", rep.scalar, s);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(n in 1usize..12, c in prop::collection::vec(-1.0..1.0f64, 24)) {
        let (x, w) = gauss_legendre(n).unwrap();
        let deg = 2 * n - 1;
        let p = |t: f64| (0..=deg).map(|k| c[k] * t.powi(k as i32)).sum::<f64>();
        let exact: f64 = (0..=deg).filter(|k| k % 2 == 0).map(|k| 2.0 * c[k] / (k as f64 + 1.0)).sum();
        let quad: f64 = x.iter().zip(&w).map(|(t, wt)| wt * p(*t)).sum();
        prop_assert!((quad - exact).abs() <= 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_exponent(p in 0.5..6.0f64, c in 1e-3..1e3f64) {
        let samples: Vec<(f64, f64)> = (3..9).map(|k| {
            let h = 2f64.powi(-k);
            (h, c * h.powf(p))
        }).collect();
        let rep = fit_scaling(&samples).unwrap();
        prop_assert!((rep.slope.unwrap() - p).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bending_energy_is_rigid_motion_invariant(r in rotation(), t in prop::array::uniform3(-5.0..5.0f64), seed in 0u64..1000) {
        let m = catalog::ex61(catalog::ex61_default_lambda(), Rect::UNIT).unwrap();
        let grid = Grid2::square(Rect::UNIT, 9).unwrap();
        let problem = BendingProblem::new(&m, &QuadraticForm3::isotropic(1.0, 0.5).unwrap(), &grid).unwrap();
        let y = Immersion::paraboloid(grid).with_noise(0.05, seed);
        let e0 = problem.energy(&y).unwrap();
        let e1 = problem.energy(&y.rigid_motion(&r, &Vector3::from(t))).unwrap();
        prop_assert!((e0.energy - e1.energy).abs() <= 1e-10 * (1.0 + e0.energy));
        prop_assert!((e0.isometry_residual - e1.isometry_residual).abs() <= 1e-10);
    }

    #[test]
    fn penalty_gradient_matches_differences(seed in 0u64..1000, eps in 1e-3..1e-1f64) {
        let m = catalog::ex63ii(catalog::ex63ii_default_lambda2(), Rect::UNIT).unwrap();
        let grid = Grid2::square(Rect::UNIT, 5).unwrap();
        let problem = BendingProblem::new(&m, &QuadraticForm3::isotropic(1.0, 1.0).unwrap(), &grid).unwrap();
        let x = Immersion::flat(grid).with_noise(0.1, seed).to_vec();
        let (_, g) = problem.objective(&x, eps);
        let h = 1e-6;
        let mut err = 0.0f64;
        for i in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (problem.objective(&a, eps).0 - problem.objective(&b, eps).0) / (2.0 * h);
            err = err.max((fd - g[i]).abs());
        }
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(err <= 1e-6 * (1.0 + scale), "{err} vs {scale}");
    }
}
